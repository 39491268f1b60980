/**
 * DOM wiring for the annotator: frame browser, polygon editor, fit panel,
 * previews, and export. All annotation data lives in the Store; all numbers
 * shown come from service responses.
 */

import { ApiClient, ApiError } from "./api.js";
import { isSelfIntersecting, nearestVertexIndex } from "./geometry.js";
import {
    Store,
    addVertex,
    applyFit,
    canExport,
    canFit,
    fitPayload,
    moveVertex,
    restoreState,
    selectFrame,
    serializeState,
    setActivePolygon,
    setParams,
    toggleLayer,
    undo,
} from "./state.js";
import type { AnnotationState, FitParams, PolygonKind, Vertex } from "./types.js";

const SESSION_KEY = "illusion-forge-annotator-session";
const COLORS: Record<PolygonKind, string> = { support: "#2f9e44", illusion: "#e8590c" };
const HIT_RADIUS = 6;

function el<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    attrs: Record<string, string> = {},
    text?: string,
): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
    if (text !== undefined) node.textContent = text;
    return node;
}

export class App {
    private store = new Store();
    private api: ApiClient;
    private root: HTMLElement;
    private frames: string[] = [];
    private toastTimer: number | undefined;
    private dragging: { kind: PolygonKind; index: number } | null = null;
    private baseImage = new Image();

    constructor(root: HTMLElement, api: ApiClient) {
        this.root = root;
        this.api = api;
        this.store.subscribe(() => this.render());
    }

    async start(): Promise<void> {
        await this.loadFrames();
        this.render();
    }

    private async loadFrames(): Promise<void> {
        try {
            this.frames = await this.api.listFrames();
            this.renderBanner(null);
        } catch (err) {
            this.frames = [];
            this.renderBanner(err instanceof Error ? err.message : String(err));
        }
        this.render();
    }

    private toast(message: string): void {
        const box = this.root.querySelector<HTMLElement>("#toast") ?? this.root.appendChild(
            el("div", { id: "toast" }),
        );
        box.textContent = message;
        box.classList.add("visible");
        window.clearTimeout(this.toastTimer);
        this.toastTimer = window.setTimeout(() => box.classList.remove("visible"), 4000);
    }

    private renderBanner(message: string | null): void {
        let banner = this.root.querySelector<HTMLElement>("#banner");
        if (!banner) {
            banner = this.root.appendChild(el("div", { id: "banner", class: "banner" }));
        }
        banner.innerHTML = "";
        if (message) {
            banner.append(el("span", {}, `service unreachable: ${message}`));
            const retry = el("button", {}, "retry");
            retry.onclick = () => void this.loadFrames();
            banner.append(retry);
            banner.classList.add("visible");
        } else {
            banner.classList.remove("visible");
        }
    }

    // -- rendering ----------------------------------------------------------

    private render(): void {
        const state = this.store.get();
        let main = this.root.querySelector<HTMLElement>("#main");
        if (!main) {
            main = this.root.appendChild(el("div", { id: "main" }));
        }
        main.innerHTML = "";
        main.append(this.renderBrowser(state));
        if (state.frameId) main.append(this.renderEditor(state));
    }

    private renderBrowser(state: AnnotationState): HTMLElement {
        const panel = el("div", { class: "browser" });
        panel.append(el("h2", {}, "Frames"));
        if (this.frames.length === 0) {
            panel.append(el("p", { class: "empty" }, "no frames in the data directory"));
            return panel;
        }
        const list = el("ul", { class: "frame-list" });
        for (const id of this.frames) {
            const item = el("li", { class: id === state.frameId ? "selected" : "" });
            const thumb = el("img", { src: this.api.imageUrl(id), class: "thumb", alt: id });
            const disp = el("img", { src: this.api.disparityUrl(id), class: "thumb", alt: `${id} disparity` });
            item.append(thumb, disp, el("span", {}, id));
            item.onclick = () => this.openFrame(id);
            list.append(item);
        }
        panel.append(list);
        return panel;
    }

    private openFrame(id: string): void {
        this.baseImage = new Image();
        this.baseImage.onload = () => this.render();
        this.baseImage.onerror = () => this.toast(`frame ${id}: image failed to load`);
        this.baseImage.src = this.api.imageUrl(id);
        this.store.dispatch((s) => selectFrame(s, id));
    }

    private renderEditor(state: AnnotationState): HTMLElement {
        const panel = el("div", { class: "editor" });

        // layer + polygon pickers
        const controls = el("div", { class: "controls" });
        const layerBtn = el("button", {}, `layer: ${state.layer}`);
        layerBtn.onclick = () => {
            this.baseImage = new Image();
            this.baseImage.onload = () => this.render();
            const next = state.layer === "image"
                ? this.api.disparityUrl(state.frameId!)
                : this.api.imageUrl(state.frameId!);
            this.baseImage.src = next;
            this.store.dispatch(toggleLayer);
        };
        controls.append(layerBtn);
        for (const kind of ["support", "illusion"] as const) {
            const btn = el("button", {
                class: state.activePolygon === kind ? "active" : "",
                style: `border-color: ${COLORS[kind]}`,
            }, `draw ${kind}`);
            btn.onclick = () => this.store.dispatch((s) => setActivePolygon(s, kind));
            controls.append(btn);
        }
        const undoBtn = el("button", {}, "undo");
        undoBtn.onclick = () => this.store.dispatch(undo);
        controls.append(undoBtn);
        panel.append(controls);

        // canvas
        const canvas = el("canvas", { class: "editor-canvas" });
        canvas.width = this.baseImage.naturalWidth || 640;
        canvas.height = this.baseImage.naturalHeight || 480;
        this.drawCanvas(canvas, state);
        canvas.onmousedown = (ev) => this.onCanvasDown(canvas, ev);
        canvas.onmousemove = (ev) => this.onCanvasMove(canvas, ev);
        canvas.onmouseup = () => (this.dragging = null);
        panel.append(canvas);

        const warnings = el("div", { class: "warnings" });
        for (const kind of ["support", "illusion"] as const) {
            if (isSelfIntersecting(state[kind])) {
                warnings.append(el("span", { class: "warn" },
                    `${kind} polygon self-intersects (fit still allowed)`));
            }
        }
        panel.append(warnings);

        panel.append(this.renderFitPanel(state));
        return panel;
    }

    private drawCanvas(canvas: HTMLCanvasElement, state: AnnotationState): void {
        const ctx = canvas.getContext("2d");
        if (!ctx) return;
        ctx.clearRect(0, 0, canvas.width, canvas.height);
        if (this.baseImage.complete && this.baseImage.naturalWidth > 0) {
            ctx.drawImage(this.baseImage, 0, 0);
        }
        for (const kind of ["support", "illusion"] as const) {
            const poly = state[kind];
            if (poly.length === 0) continue;
            ctx.strokeStyle = COLORS[kind];
            ctx.fillStyle = COLORS[kind];
            ctx.lineWidth = 1.5;
            ctx.beginPath();
            ctx.moveTo(poly[0]!.x, poly[0]!.y);
            for (const v of poly.slice(1)) ctx.lineTo(v.x, v.y);
            if (poly.length >= 3) ctx.closePath();
            ctx.stroke();
            for (const v of poly) {
                ctx.beginPath();
                ctx.arc(v.x, v.y, 3, 0, Math.PI * 2);
                ctx.fill();
            }
        }
    }

    private canvasPoint(canvas: HTMLCanvasElement, ev: MouseEvent): Vertex {
        const rect = canvas.getBoundingClientRect();
        return {
            x: ((ev.clientX - rect.left) / rect.width) * canvas.width,
            y: ((ev.clientY - rect.top) / rect.height) * canvas.height,
        };
    }

    private onCanvasDown(canvas: HTMLCanvasElement, ev: MouseEvent): void {
        const state = this.store.get();
        const p = this.canvasPoint(canvas, ev);
        for (const kind of ["support", "illusion"] as const) {
            const idx = nearestVertexIndex(state[kind], p, HIT_RADIUS);
            if (idx !== null) {
                this.dragging = { kind, index: idx };
                return;
            }
        }
        this.store.dispatch((s) => addVertex(s, s.activePolygon, p));
    }

    private onCanvasMove(canvas: HTMLCanvasElement, ev: MouseEvent): void {
        if (!this.dragging) return;
        const p = this.canvasPoint(canvas, ev);
        const { kind, index } = this.dragging;
        this.store.dispatch((s) => moveVertex(s, kind, index, p));
    }

    // -- fit / export ---------------------------------------------------------

    private renderFitPanel(state: AnnotationState): HTMLElement {
        const panel = el("div", { class: "fit-panel" });
        const params = el("div", { class: "params" });
        const fields: Array<[keyof FitParams, string]> = [
            ["tau_d", "inlier threshold (px)"],
            ["iters", "iterations"],
            ["seed", "seed"],
            ["feather_px", "feather (px)"],
        ];
        for (const [key, label] of fields) {
            const wrap = el("label", {}, label);
            const input = el("input", { type: "number", value: String(state.params[key]) });
            input.onchange = () => {
                const value = Number(input.value);
                if (Number.isFinite(value)) {
                    this.store.dispatch((s) => setParams(s, { [key]: value }));
                }
            };
            wrap.append(input);
            params.append(wrap);
        }
        panel.append(params);

        const actions = el("div", { class: "actions" });
        const fitBtn = el("button", { id: "fit" }, "fit plane");
        fitBtn.disabled = !canFit(state);
        fitBtn.onclick = () => void this.runFit();
        actions.append(fitBtn);

        const exportBtn = el("button", { id: "export" }, "export");
        exportBtn.disabled = !canExport(state);
        exportBtn.onclick = () => void this.runExport();
        actions.append(exportBtn);

        const saveBtn = el("button", {}, "save session");
        saveBtn.onclick = () => {
            localStorage.setItem(SESSION_KEY, serializeState(this.store.get()));
            this.toast("session saved");
        };
        actions.append(saveBtn);

        const restoreBtn = el("button", {}, "restore session");
        restoreBtn.onclick = () => {
            const raw = localStorage.getItem(SESSION_KEY);
            if (!raw) return this.toast("no saved session");
            try {
                const restored = restoreState(raw);
                this.store.dispatch(() => restored);
                if (restored.frameId) this.openFrame(restored.frameId);
            } catch (err) {
                this.toast(err instanceof Error ? err.message : String(err));
            }
        };
        actions.append(restoreBtn);
        panel.append(actions);

        panel.append(el("div", { id: "fit-error", class: "error" }));
        panel.append(this.renderStats(state));
        panel.append(this.renderPreviews(state));
        panel.append(el("div", { id: "export-result", class: "export-result" }));
        return panel;
    }

    private renderStats(state: AnnotationState): HTMLElement {
        const stats = el("div", { class: "stats" });
        const fit = state.lastFit;
        if (!fit) {
            stats.append(el("p", { class: "empty" }, "no fit yet"));
            return stats;
        }
        const rows: Array<[string, string]> = [
            ["alpha", fit.plane.alpha.toPrecision(6)],
            ["beta", fit.plane.beta.toPrecision(6)],
            ["delta", fit.plane.delta.toPrecision(6)],
            ["gamma", fit.plane.gamma.toPrecision(6)],
            ["inliers", String(fit.plane.inliers)],
            ["inlier ratio", `${(fit.inlier_ratio * 100).toFixed(1)}%`],
            ["rms (px)", fit.rms.toPrecision(4)],
        ];
        const table = el("table", { class: "stats-table" });
        for (const [name, value] of rows) {
            const tr = el("tr");
            tr.append(el("td", {}, name), el("td", {}, value));
            table.append(tr);
        }
        stats.append(table);
        return stats;
    }

    private renderPreviews(state: AnnotationState): HTMLElement {
        const box = el("div", { class: "previews" });
        if (!state.frameId) return box;
        const fit = state.lastFit;
        const panes: Array<[string, string | null, string]> = [
            ["original", this.api.disparityUrl(state.frameId), ""],
            ["rectified", fit ? this.api.previewUrl(fit.previews.rectified.id) : null,
             fit ? `range ${fit.previews.rectified.min.toPrecision(4)} .. ${fit.previews.rectified.max.toPrecision(4)}` : ""],
            ["difference", fit ? this.api.previewUrl(fit.previews.difference.id) : null,
             fit ? `max ${fit.previews.difference.max.toPrecision(4)}` : ""],
        ];
        for (const [label, url, caption] of panes) {
            const pane = el("figure", { class: "preview" });
            pane.append(el("figcaption", {}, caption ? `${label} (${caption})` : label));
            if (url) pane.append(el("img", { src: url, alt: label }));
            else pane.append(el("div", { class: "placeholder" }, "fit to generate"));
            box.append(pane);
        }
        return box;
    }

    private async runFit(): Promise<void> {
        const state = this.store.get();
        if (!canFit(state) || !state.frameId) return;
        const errorBox = this.root.querySelector<HTMLElement>("#fit-error");
        try {
            const fit = await this.api.fit(state.frameId, fitPayload(state));
            this.store.dispatch((s) => applyFit(s, fit));
        } catch (err) {
            if (err instanceof DOMException && err.name === "AbortError") return;
            // show the service error verbatim; the previous preview stays up
            if (errorBox) errorBox.textContent =
                err instanceof ApiError ? err.message : String(err);
        }
    }

    private async runExport(): Promise<void> {
        const state = this.store.get();
        if (!canExport(state) || !state.frameId) return;
        const box = this.root.querySelector<HTMLElement>("#export-result");
        try {
            const result = await this.api.exportAnnotation(state.frameId, fitPayload(state));
            if (box) {
                box.innerHTML = "";
                for (const path of result.written) box.append(el("div", {}, `wrote ${path}`));
                for (const path of result.unchanged) box.append(el("div", {}, `unchanged ${path}`));
            }
        } catch (err) {
            if (box) box.textContent =
                `export failed: ${err instanceof Error ? err.message : String(err)}`;
        }
    }
}
