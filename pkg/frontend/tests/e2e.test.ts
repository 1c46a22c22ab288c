/** End-to-end loop against the fixture service: review, persist, retrain. */

import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ReviewStore } from "../src/state.js";
import { renderApp } from "../src/ui.js";
import { FixtureService } from "./fixture_service.js";

const BASE = "http://fixture.test";

describe("review loop", () => {
  it("verdict round-trip: submit, fetch labels, render", async () => {
    const svc = new FixtureService({ nSources: 3 });
    const api = new ApiClient({ baseUrl: BASE, fetchImpl: svc.fetch });
    const store = new ReviewStore(api);
    store.curator = "kay";

    await store.loadSources();
    await store.loadCandidates("SV0000");
    const top = store.snapshot().items[0]?.list?.candidates[0];
    expect(top).toBeDefined();

    const ok = await store.submitVerdict("SV0000", top!.target, "accept");
    expect(ok).toBe(true);

    // the verdict visible in the UI exists in the label log after refresh
    const labels = await api.labels();
    expect(labels).toHaveLength(1);
    expect(labels[0]).toMatchObject({
      source: "SV0000",
      target: top!.target,
      verdict: "accept",
      curator: "kay",
    });

    const html = renderApp(store.snapshot());
    expect(html).toContain('data-source="SV0000"');
    expect(html).toContain("state-accepted");
  });

  it("accept then retrain: next fetch carries the new version, never mixed", async () => {
    const svc = new FixtureService({ nSources: 3 });
    const store = new ReviewStore(
      new ApiClient({ baseUrl: BASE, fetchImpl: svc.fetch }),
    );
    await store.loadSources();
    await store.loadCandidates("SV0000");
    await store.loadCandidates("SV0001");
    expect(store.snapshot().version).toBe("heuristic-mean-sim-v1");

    const top = store.snapshot().items[0]?.list?.candidates[0];
    await store.submitVerdict("SV0000", top!.target, "accept");
    expect(await store.retrain()).toBe(true);

    // retrain flushed every pre-retrain list
    let snap = store.snapshot();
    expect(snap.version).toBe("model-v1");
    expect(snap.items.every((i) => i.list === null)).toBe(true);

    await store.loadCandidates("SV0001");
    await store.loadCandidates("SV0002");
    snap = store.snapshot();
    const versions = new Set(
      snap.items
        .map((i) => i.list?.model_version)
        .filter((v): v is string => Boolean(v)),
    );
    expect(versions).toEqual(new Set(["model-v1"]));

    const html = renderApp(store.snapshot());
    expect(html).toContain("model-v1");
    expect(html).not.toContain("heuristic-mean-sim-v1");
  });

  it("server 409 on a verdict: toast shown, state rolled back, log clean", async () => {
    const svc = new FixtureService({ nSources: 2 });
    const store = new ReviewStore(
      new ApiClient({ baseUrl: BASE, fetchImpl: svc.fetch }),
    );
    await store.loadSources();
    await store.loadCandidates("SV0000");
    svc.busy = true; // retrain running on the server

    const top = store.snapshot().items[0]?.list?.candidates[0];
    const ok = await store.submitVerdict("SV0000", top!.target, "accept");
    expect(ok).toBe(false);

    const snap = store.snapshot();
    expect(snap.items[0]?.state).toBe("unreviewed");
    const html = renderApp(snap);
    expect(html).toContain("toast error");
    expect(html).toContain("retrain_in_flight");
    expect(await new ApiClient({ baseUrl: BASE, fetchImpl: svc.fetch }).labels()).toHaveLength(0);
  });

  it("keeps rendering a 60-source queue with progress", async () => {
    const svc = new FixtureService({ nSources: 60 });
    const store = new ReviewStore(
      new ApiClient({ baseUrl: BASE, fetchImpl: svc.fetch }),
    );
    await store.loadSources();
    for (let i = 0; i < 12; i++) {
      store.skip(`SV${String(i).padStart(4, "0")}`);
    }
    const html = renderApp(store.snapshot());
    expect(html).toContain("12/60 reviewed");
    expect(html).toContain("width:20%");
  });
});
