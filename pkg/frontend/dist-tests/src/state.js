/**
 * Annotation state container. Every mutation is a pure transition producing a
 * new frozen state, so nothing outside this module can hold hidden
 * annotation data, and the store observes each change exactly once.
 */
export const DEFAULT_PARAMS = {
    tau_d: 1.0,
    iters: 100,
    seed: 0,
    feather_px: 8,
};
const MAX_HISTORY = 128;
function deepFreeze(value) {
    if (value && typeof value === "object" && !Object.isFrozen(value)) {
        Object.freeze(value);
        for (const key of Object.keys(value)) {
            deepFreeze(value[key]);
        }
    }
    return value;
}
function finish(state) {
    return deepFreeze(state);
}
export function initialState() {
    return finish({
        frameId: null,
        support: [],
        illusion: [],
        activePolygon: "support",
        layer: "image",
        params: { ...DEFAULT_PARAMS },
        lastFit: null,
        history: [],
    });
}
function snapshot(state) {
    const entry = { support: state.support, illusion: state.illusion };
    const history = [...state.history, entry];
    return history.length > MAX_HISTORY ? history.slice(-MAX_HISTORY) : history;
}
export function selectFrame(state, frameId) {
    if (frameId === state.frameId)
        return state;
    return finish({
        ...initialState(),
        frameId,
        params: state.params, // fit parameters carry across frames
    });
}
export function addVertex(state, kind, v) {
    const poly = [...state[kind], { x: v.x, y: v.y }];
    return finish({ ...state, history: snapshot(state), [kind]: poly });
}
export function moveVertex(state, kind, index, v) {
    const poly = state[kind];
    if (index < 0 || index >= poly.length)
        return state;
    const next = poly.map((p, i) => (i === index ? { x: v.x, y: v.y } : p));
    return finish({ ...state, history: snapshot(state), [kind]: next });
}
/** Undo restores the previous (support, illusion) vertex lists. */
export function undo(state) {
    const prev = state.history[state.history.length - 1];
    if (!prev)
        return state;
    return finish({
        ...state,
        support: prev.support,
        illusion: prev.illusion,
        history: state.history.slice(0, -1),
    });
}
export function setActivePolygon(state, kind) {
    return kind === state.activePolygon ? state : finish({ ...state, activePolygon: kind });
}
export function toggleLayer(state) {
    const layer = state.layer === "image" ? "disparity" : "image";
    return finish({ ...state, layer });
}
export function setParams(state, partial) {
    return finish({ ...state, params: { ...state.params, ...partial } });
}
export function applyFit(state, fit) {
    return finish({ ...state, lastFit: fit });
}
/** Fits are enabled once both polygons are closed (>= 3 vertices). */
export function canFit(state) {
    return state.frameId !== null && state.support.length >= 3 && state.illusion.length >= 3;
}
export function canExport(state) {
    return canFit(state) && state.lastFit !== null;
}
/** The exact wire payload for POST /api/frame/{id}/fit and /export. */
export function fitPayload(state) {
    if (!canFit(state)) {
        throw new Error("fit requires a selected frame and two closed polygons");
    }
    return {
        support_polygon: state.support.map((v) => [v.x, v.y]),
        illusion_polygon: state.illusion.map((v) => [v.x, v.y]),
        tau_d: state.params.tau_d,
        iters: state.params.iters,
        seed: state.params.seed,
        feather_px: state.params.feather_px,
    };
}
export function serializeState(state) {
    const session = {
        version: 1,
        frameId: state.frameId,
        support: state.support.map((v) => ({ ...v })),
        illusion: state.illusion.map((v) => ({ ...v })),
        activePolygon: state.activePolygon,
        layer: state.layer,
        params: { ...state.params },
        lastFit: state.lastFit,
    };
    return JSON.stringify(session);
}
function isVertexList(value) {
    return (Array.isArray(value) &&
        value.every((v) => v !== null &&
            typeof v === "object" &&
            typeof v.x === "number" &&
            typeof v.y === "number"));
}
export function restoreState(json) {
    let raw;
    try {
        raw = JSON.parse(json);
    }
    catch {
        throw new Error("session restore failed: not valid JSON");
    }
    const session = raw;
    if (session?.version !== 1) {
        throw new Error("session restore failed: unknown session version");
    }
    if (!isVertexList(session.support) || !isVertexList(session.illusion)) {
        throw new Error("session restore failed: malformed polygons");
    }
    const params = session.params;
    if (!params ||
        typeof params.tau_d !== "number" ||
        typeof params.iters !== "number" ||
        typeof params.seed !== "number" ||
        typeof params.feather_px !== "number") {
        throw new Error("session restore failed: malformed fit params");
    }
    return deepFreeze({
        frameId: typeof session.frameId === "string" ? session.frameId : null,
        support: session.support,
        illusion: session.illusion,
        activePolygon: session.activePolygon === "illusion" ? "illusion" : "support",
        layer: session.layer === "disparity" ? "disparity" : "image",
        params: { ...params },
        lastFit: session.lastFit ?? null,
        history: [],
    });
}
/** Serializes every mutation through one dispatch queue. */
export class Store {
    state;
    listeners = new Set();
    constructor(state = initialState()) {
        this.state = state;
    }
    get() {
        return this.state;
    }
    dispatch(transition) {
        const next = transition(this.state);
        if (next !== this.state) {
            this.state = next;
            for (const listener of this.listeners)
                listener(next);
        }
        return next;
    }
    subscribe(listener) {
        this.listeners.add(listener);
        return () => this.listeners.delete(listener);
    }
}
