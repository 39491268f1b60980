/**
 * Presentation-side polygon helpers: vertex hit-testing for dragging and a
 * self-intersection check for the editor warning. All fit geometry (plane
 * math, rasterization, statistics) lives server-side; nothing here feeds a
 * displayed number.
 */
function orient(a, b, c) {
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}
function onSegment(a, b, p) {
    return (Math.min(a.x, b.x) <= p.x && p.x <= Math.max(a.x, b.x) &&
        Math.min(a.y, b.y) <= p.y && p.y <= Math.max(a.y, b.y));
}
export function segmentsIntersect(a, b, c, d) {
    const o1 = orient(a, b, c);
    const o2 = orient(a, b, d);
    const o3 = orient(c, d, a);
    const o4 = orient(c, d, b);
    if (((o1 > 0) !== (o2 > 0)) && ((o3 > 0) !== (o4 > 0)) && o1 !== 0 && o2 !== 0 && o3 !== 0 && o4 !== 0) {
        return true;
    }
    if (o1 === 0 && onSegment(a, b, c))
        return true;
    if (o2 === 0 && onSegment(a, b, d))
        return true;
    if (o3 === 0 && onSegment(c, d, a))
        return true;
    if (o4 === 0 && onSegment(c, d, b))
        return true;
    return false;
}
/** True when any two non-adjacent edges of the closed polygon cross. */
export function isSelfIntersecting(poly) {
    const n = poly.length;
    if (n < 4)
        return false;
    for (let i = 0; i < n; i++) {
        const a = poly[i];
        const b = poly[(i + 1) % n];
        for (let j = i + 1; j < n; j++) {
            // skip edges sharing a vertex (adjacent, or first/last pair)
            if (j === i || (j + 1) % n === i || (i + 1) % n === j)
                continue;
            const c = poly[j];
            const d = poly[(j + 1) % n];
            if (segmentsIntersect(a, b, c, d))
                return true;
        }
    }
    return false;
}
/** Index of the closest vertex within `radius` of `p`, or null. */
export function nearestVertexIndex(poly, p, radius) {
    let best = null;
    let bestDist = radius * radius;
    for (let i = 0; i < poly.length; i++) {
        const v = poly[i];
        const d2 = (v.x - p.x) ** 2 + (v.y - p.y) ** 2;
        if (d2 <= bestDist) {
            best = i;
            bestDist = d2;
        }
    }
    return best;
}
