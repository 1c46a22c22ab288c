/** Session state: review queue, optimistic verdicts, model version guard.
 *
 * The guard keeps one invariant: every candidate list held by the store came
 * from the same model version. Any response or health poll that reveals a
 * different version flushes all cached lists before anything new is stored,
 * and replies that were already in flight when the version moved on are
 * dropped (tracked with an epoch counter, since version ids are opaque).
 */

import { ApiClient, ServiceError } from "./api.js";
import type {
  CandidateList,
  Filter,
  Progress,
  QueueItem,
  ReviewState,
  StoreSnapshot,
  Toast,
  Verdict,
} from "./types.js";

export class ReviewStore {
  private sources: { name: string; label?: string; sheet?: string; rule?: string }[] = [];
  private states = new Map<string, ReviewState>();
  private lists = new Map<string, CandidateList>();
  private activeVersion: string | null = null;
  private epoch = 0;
  filter: Filter = "all";
  toast: Toast | null = null;
  connected = true;
  curator = "reviewer";

  constructor(private readonly api: ApiClient) {}

  async loadSources(): Promise<void> {
    try {
      this.sources = await this.api.sources();
      this.connected = true;
    } catch (err) {
      this.fail(err);
      return;
    }
    this.states = new Map(this.sources.map((s) => [s.name, "unreviewed"]));
    this.lists.clear();
  }

  /** Fetch one source's candidates. Returns false if the reply was stale. */
  async loadCandidates(
    source: string,
    top = 20,
    features = true,
  ): Promise<boolean> {
    const launchedEpoch = this.epoch;
    let resp: CandidateList;
    try {
      resp = await this.api.candidates(source, top, features);
      this.connected = true;
    } catch (err) {
      this.fail(err);
      return false;
    }
    return this.accept(resp, launchedEpoch);
  }

  private accept(resp: CandidateList, launchedEpoch: number): boolean {
    if (this.activeVersion === null) {
      this.activeVersion = resp.model_version;
    } else if (resp.model_version !== this.activeVersion) {
      if (launchedEpoch < this.epoch) return false; // stale in-flight reply
      // a fresh reply revealed a new model: flush everything older
      this.epoch += 1;
      this.activeVersion = resp.model_version;
      this.lists.clear();
    }
    this.lists.set(resp.source, resp);
    return true;
  }

  /** Feed a model version observed out of band (health polling, retrain). */
  noteVersion(version: string): void {
    if (this.activeVersion === null) {
      this.activeVersion = version;
    } else if (version !== this.activeVersion) {
      this.epoch += 1;
      this.activeVersion = version;
      this.lists.clear();
    }
  }

  async pollVersion(): Promise<void> {
    try {
      const health = await this.api.healthz();
      this.connected = true;
      this.noteVersion(health.model_version);
    } catch (err) {
      this.fail(err);
    }
  }

  /** Optimistic: the item flips immediately and rolls back on rejection. */
  async submitVerdict(
    source: string,
    target: string,
    verdict: Verdict,
  ): Promise<boolean> {
    const prev = this.states.get(source) ?? "unreviewed";
    this.states.set(source, verdict === "accept" ? "accepted" : "rejected");
    try {
      await this.api.submitLabel(source, target, verdict, this.curator);
      return true;
    } catch (err) {
      this.states.set(source, prev);
      this.fail(err);
      return false;
    }
  }

  skip(source: string): void {
    this.states.set(source, "skipped");
  }

  async retrain(): Promise<boolean> {
    try {
      const resp = await this.api.retrain();
      this.noteVersion(resp.model_version);
      this.toast = { kind: "info", message: `model ${resp.model_version}` };
      return true;
    } catch (err) {
      this.fail(err);
      return false;
    }
  }

  clearToast(): void {
    this.toast = null;
  }

  private fail(err: unknown): void {
    if (err instanceof ServiceError) {
      if (err.status === 0) this.connected = false;
      this.toast = { kind: "error", message: `${err.code}: ${err.message}` };
    } else {
      this.toast = { kind: "error", message: String(err) };
    }
  }

  progress(): Progress {
    let reviewed = 0;
    for (const state of this.states.values()) {
      if (state !== "unreviewed") reviewed += 1;
    }
    return { reviewed, total: this.states.size };
  }

  snapshot(): StoreSnapshot {
    const items: QueueItem[] = this.sources.map((source) => ({
      source,
      state: this.states.get(source.name) ?? "unreviewed",
      list: this.lists.get(source.name) ?? null,
    }));
    return {
      items,
      filter: this.filter,
      progress: this.progress(),
      version: this.activeVersion,
      toast: this.toast,
      connected: this.connected,
    };
  }
}
