export interface Vertex {
    x: number;
    y: number;
}

export type PolygonKind = "support" | "illusion";

export type LayerKind = "image" | "disparity";

export interface FitParams {
    tau_d: number;
    iters: number;
    seed: number;
    feather_px: number;
}

export interface PlaneJson {
    alpha: number;
    beta: number;
    delta: number;
    gamma: number;
    inliers: number;
    rms: number;
}

export interface PreviewRef {
    id: string;
    min: number;
    max: number;
}

export interface FitResponse {
    plane: PlaneJson;
    inlier_count: number;
    inlier_ratio: number;
    rms: number;
    preview_id: string;
    previews: {
        rectified: PreviewRef;
        difference: PreviewRef;
    };
}

export interface ExportResponse {
    written: string[];
    unchanged: string[];
}

export interface FitRequest {
    support_polygon: number[][];
    illusion_polygon: number[][];
    tau_d: number;
    iters: number;
    seed: number;
    feather_px: number;
}

/** Everything the annotation session needs to survive a reload. */
export interface AnnotationState {
    frameId: string | null;
    support: Vertex[];
    illusion: Vertex[];
    activePolygon: PolygonKind;
    layer: LayerKind;
    params: FitParams;
    lastFit: FitResponse | null;
    /** snapshots of (support, illusion) for undo; not serialized */
    history: Array<{ support: Vertex[]; illusion: Vertex[] }>;
}
