/**
 * Typed client for the annotation service. The UI never computes fit
 * geometry locally: every displayed number flows out of these responses.
 */
export class ApiError extends Error {
    status;
    constructor(status, message) {
        super(message);
        this.status = status;
    }
}
async function errorFrom(resp) {
    let message = `${resp.status} ${resp.statusText}`;
    try {
        const body = (await resp.json());
        if (body && typeof body.error === "string")
            message = body.error;
    }
    catch {
        // non-JSON error body; keep the status line
    }
    return new ApiError(resp.status, message);
}
export class ApiClient {
    baseUrl;
    inflightFits = new Map();
    constructor(baseUrl) {
        this.baseUrl = baseUrl.replace(/\/$/, "");
    }
    async listFrames() {
        const resp = await fetch(`${this.baseUrl}/api/frames`);
        if (!resp.ok)
            throw await errorFrom(resp);
        return (await resp.json());
    }
    imageUrl(frameId) {
        return `${this.baseUrl}/api/frame/${encodeURIComponent(frameId)}/image`;
    }
    disparityUrl(frameId) {
        return `${this.baseUrl}/api/frame/${encodeURIComponent(frameId)}/disparity`;
    }
    rawDisparityUrl(frameId) {
        return `${this.disparityUrl(frameId)}?raw=1`;
    }
    previewUrl(previewId) {
        return `${this.baseUrl}/api/preview/${encodeURIComponent(previewId)}`;
    }
    /** Value range of the frame's disparity color map (from response headers). */
    async disparityRange(frameId) {
        const resp = await fetch(this.disparityUrl(frameId));
        if (!resp.ok)
            throw await errorFrom(resp);
        await resp.arrayBuffer();
        return {
            min: Number(resp.headers.get("X-Value-Min") ?? "0"),
            max: Number(resp.headers.get("X-Value-Max") ?? "0"),
        };
    }
    /**
     * POST a fit. One in-flight fit per frame: a newer request aborts and
     * replaces the previous one.
     */
    async fit(frameId, payload) {
        this.inflightFits.get(frameId)?.abort();
        const controller = new AbortController();
        this.inflightFits.set(frameId, controller);
        try {
            const resp = await fetch(`${this.baseUrl}/api/frame/${encodeURIComponent(frameId)}/fit`, {
                method: "POST",
                headers: { "Content-Type": "application/json" },
                body: JSON.stringify(payload),
                signal: controller.signal,
            });
            if (!resp.ok)
                throw await errorFrom(resp);
            return (await resp.json());
        }
        finally {
            if (this.inflightFits.get(frameId) === controller) {
                this.inflightFits.delete(frameId);
            }
        }
    }
    async exportAnnotation(frameId, payload) {
        const resp = await fetch(`${this.baseUrl}/api/frame/${encodeURIComponent(frameId)}/export`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(payload),
        });
        if (!resp.ok)
            throw await errorFrom(resp);
        return (await resp.json());
    }
}
