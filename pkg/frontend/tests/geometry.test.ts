import assert from "node:assert/strict";
import { test } from "node:test";

import { isSelfIntersecting, nearestVertexIndex, segmentsIntersect } from "../src/geometry.js";

test("segment intersection basics", () => {
    assert.equal(
        segmentsIntersect({ x: 0, y: 0 }, { x: 2, y: 2 }, { x: 0, y: 2 }, { x: 2, y: 0 }),
        true,
    );
    assert.equal(
        segmentsIntersect({ x: 0, y: 0 }, { x: 1, y: 0 }, { x: 0, y: 1 }, { x: 1, y: 1 }),
        false,
    );
    // touching at an endpoint counts as intersecting segments
    assert.equal(
        segmentsIntersect({ x: 0, y: 0 }, { x: 1, y: 1 }, { x: 1, y: 1 }, { x: 2, y: 0 }),
        true,
    );
});

test("square is not self-intersecting, bow-tie is", () => {
    const square = [
        { x: 0, y: 0 }, { x: 10, y: 0 }, { x: 10, y: 10 }, { x: 0, y: 10 },
    ];
    assert.equal(isSelfIntersecting(square), false);

    const bowtie = [
        { x: 0, y: 0 }, { x: 10, y: 10 }, { x: 10, y: 0 }, { x: 0, y: 10 },
    ];
    assert.equal(isSelfIntersecting(bowtie), true);
});

test("triangles never self-intersect", () => {
    const tri = [{ x: 0, y: 0 }, { x: 5, y: 0 }, { x: 0, y: 5 }];
    assert.equal(isSelfIntersecting(tri), false);
});

test("nearest vertex hit-testing honors the radius", () => {
    const poly = [{ x: 0, y: 0 }, { x: 10, y: 0 }, { x: 10, y: 10 }];
    assert.equal(nearestVertexIndex(poly, { x: 10.5, y: 0.5 }, 2), 1);
    assert.equal(nearestVertexIndex(poly, { x: 5, y: 5 }, 2), null);
    // closest of several candidates wins
    assert.equal(nearestVertexIndex(poly, { x: 9, y: 9 }, 20), 2);
});
