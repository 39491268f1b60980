/**
 * Scripted end-to-end session against a live annotation service: drawing the
 * fixture polygons through the state container and the API client must
 * produce a /fit response identical to the CLI plane JSON, /export bytes
 * identical to the CLI rectify output, and a session that survives
 * serialize/restore.
 */
import assert from "node:assert/strict";
import { execFile, spawn } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import net from "node:net";
import os from "node:os";
import path from "node:path";
import { after, before, test } from "node:test";
import { promisify } from "node:util";
import { ApiClient } from "../src/api.js";
import { Store, addVertex, applyFit, fitPayload, restoreState, selectFrame, serializeState, setParams, } from "../src/state.js";
const execFileP = promisify(execFile);
const PYTHON = process.env.PYTHON ?? "python3";
const SUPPORT_POLY = [
    { x: 3.5, y: 3.5 }, { x: 27.5, y: 3.5 }, { x: 27.5, y: 27.5 }, { x: 3.5, y: 27.5 },
];
const ILLUSION_POLY = [
    { x: 7.5, y: 7.5 }, { x: 23.5, y: 7.5 }, { x: 23.5, y: 23.5 }, { x: 7.5, y: 23.5 },
];
let dataDir;
let server = null;
let base;
async function freePort() {
    return new Promise((resolve, reject) => {
        const srv = net.createServer();
        srv.listen(0, "127.0.0.1", () => {
            const address = srv.address();
            if (address && typeof address === "object") {
                const port = address.port;
                srv.close(() => resolve(port));
            }
            else {
                srv.close(() => reject(new Error("no port")));
            }
        });
    });
}
async function waitForService(url, timeoutMs = 15000) {
    const deadline = Date.now() + timeoutMs;
    let lastErr;
    while (Date.now() < deadline) {
        try {
            const resp = await fetch(url);
            if (resp.ok)
                return;
        }
        catch (err) {
            lastErr = err;
        }
        await new Promise((r) => setTimeout(r, 150));
    }
    throw new Error(`service did not come up: ${String(lastErr)}`);
}
before(async () => {
    dataDir = mkdtempSync(path.join(os.tmpdir(), "annotator-it-"));
    const helper = path.join(import.meta.dirname, "..", "..", "tests", "helpers", "make_fixture.py");
    await execFileP(PYTHON, [helper, dataDir]);
    const port = await freePort();
    base = `http://127.0.0.1:${port}`;
    server = spawn(PYTHON, [
        "-m", "illusion_forge", "serve", "--data-dir", dataDir, "--port", String(port),
    ], { stdio: ["ignore", "pipe", "pipe"] });
    server.stderr?.on("data", (chunk) => {
        process.stderr.write(`[service] ${chunk.toString()}`);
    });
    await waitForService(`${base}/api/frames`);
});
after(() => {
    server?.kill("SIGTERM");
    rmSync(dataDir, { recursive: true, force: true });
});
function scriptedSession(api) {
    const store = new Store();
    store.dispatch((s) => selectFrame(s, "plane01"));
    store.dispatch((s) => setParams(s, { tau_d: 0.1, iters: 100, seed: 0, feather_px: 0 }));
    for (const v of SUPPORT_POLY)
        store.dispatch((s) => addVertex(s, "support", v));
    for (const v of ILLUSION_POLY)
        store.dispatch((s) => addVertex(s, "illusion", v));
    return store;
}
test("frame browser sees the fixture frame", async () => {
    const api = new ApiClient(base);
    assert.deepEqual(await api.listFrames(), ["plane01"]);
});
test("scripted session fit matches the CLI plane JSON; export bytes match CLI rectify", async () => {
    const api = new ApiClient(base);
    const store = scriptedSession(api);
    const fit = await api.fit("plane01", fitPayload(store.get()));
    store.dispatch((s) => applyFit(s, fit));
    assert.ok(Math.abs(fit.plane.delta - 1) < 1e-9);
    assert.ok(Math.abs(fit.plane.gamma + 5) < 1e-9);
    // export through the UI path, then run the CLI on the exported annotation
    const exported = await api.exportAnnotation("plane01", fitPayload(store.get()));
    const frameDir = path.join(dataDir, "plane01");
    assert.equal(exported.written.length, 3);
    const cliFit = await execFileP(PYTHON, [
        "-m", "illusion_forge", "fit-plane",
        "--disparity", path.join(frameDir, "disp.pfm"),
        "--mask", path.join(frameDir, "labels.png"),
        "--pairs", path.join(frameDir, "pairs.json"),
        "--tau-d", "0.1", "--seed", "0",
    ]);
    const cliPlane = JSON.parse(cliFit.stdout);
    assert.deepEqual(fit.plane, cliPlane);
    const cliOut = path.join(dataDir, "cli-rect.pfm");
    await execFileP(PYTHON, [
        "-m", "illusion_forge", "rectify",
        "--disparity", path.join(frameDir, "disp.pfm"),
        "--mask", path.join(frameDir, "labels.png"),
        "--pairs", path.join(frameDir, "pairs.json"),
        "--tau-d", "0.1", "--seed", "0", "--feather", "0",
        "--out", cliOut,
    ]);
    const serviceBytes = readFileSync(path.join(frameDir, "rectified.pfm"));
    const cliBytes = readFileSync(cliOut);
    assert.ok(serviceBytes.equals(cliBytes), "service export differs from CLI rectify");
    // re-export is idempotent: nothing rewritten, bytes unchanged
    const again = await api.exportAnnotation("plane01", fitPayload(store.get()));
    assert.deepEqual(again.written, []);
    assert.equal(again.unchanged.length, 3);
    assert.ok(readFileSync(path.join(frameDir, "rectified.pfm")).equals(serviceBytes));
});
test("previews referenced by the fit response are fetchable PNGs", async () => {
    const api = new ApiClient(base);
    const store = scriptedSession(api);
    const fit = await api.fit("plane01", fitPayload(store.get()));
    for (const ref of [fit.previews.rectified, fit.previews.difference]) {
        const resp = await fetch(api.previewUrl(ref.id));
        assert.equal(resp.status, 200);
        const bytes = Buffer.from(await resp.arrayBuffer());
        assert.ok(bytes.subarray(0, 4).equals(Buffer.from([0x89, 0x50, 0x4e, 0x47])));
        assert.equal(Number(resp.headers.get("X-Value-Min")), ref.min);
        assert.equal(Number(resp.headers.get("X-Value-Max")), ref.max);
    }
});
test("session restore mid-edit reproduces polygons and fit display", async () => {
    const api = new ApiClient(base);
    const store = scriptedSession(api);
    const fit = await api.fit("plane01", fitPayload(store.get()));
    store.dispatch((s) => applyFit(s, fit));
    const saved = serializeState(store.get());
    const restored = restoreState(saved);
    assert.deepEqual(restored.support, store.get().support);
    assert.deepEqual(restored.illusion, store.get().illusion);
    assert.deepEqual(restored.lastFit, store.get().lastFit);
    assert.deepEqual(restored.params, store.get().params);
    // a restored session re-fits to the identical response (same preview ids)
    const refit = await api.fit(restored.frameId, fitPayload(restored));
    assert.deepEqual(refit, fit);
});
test("degenerate polygons surface the service error verbatim", async () => {
    const api = new ApiClient(base);
    const store = scriptedSession(api);
    const payload = fitPayload(store.get());
    payload.support_polygon = [[0.1, 0.1], [0.2, 0.1], [0.2, 0.2]];
    await assert.rejects(() => api.fit("plane01", payload), (err) => /degenerate support region/.test(err.message));
});
test("unknown frame id is a 404 and leaves the session on the list", async () => {
    const api = new ApiClient(base);
    const store = scriptedSession(api);
    const payload = fitPayload(store.get());
    await assert.rejects(() => api.fit("missing", payload), (err) => err.status === 404);
});
