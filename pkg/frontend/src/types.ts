/** Shared shapes for the review console. Mirrors the match service JSON. */

/** Fixed, versioned feature order; bars always render in this order. */
export const FEATURE_ORDER = [
  "E5_on_label",
  "E5_on_sheet",
  "E5_on_label_key",
  "MPNet_on_label",
  "MPNet_on_sheet",
  "MPNet_on_label_key",
  "MiniLM_on_label",
  "MiniLM_on_sheet",
  "MiniLM_on_label_key",
  "Fuzzy_on_label",
  "Fuzzy_on_sheet",
  "Fuzzy_on_label_key",
  "Label_len_EU",
  "Label_len_JP",
  "Derive_info_len_EU",
  "Derive_info_len_JP",
  "Derive_info_null_EU",
  "Derive_info_null_JP",
] as const;

export type FeatureName = (typeof FEATURE_ORDER)[number];

export interface SourceInfo {
  name: string;
  label?: string;
  sheet?: string;
  rule?: string;
}

export interface Candidate {
  target: string;
  score: number;
  rank: number;
  features?: Record<string, number>;
}

export interface CandidateList {
  source: string;
  model_version: string;
  candidates: Candidate[];
}

export type Verdict = "accept" | "reject";

export interface MatchLabel {
  source: string;
  target: string;
  verdict: string;
  curator: string;
  ts: string;
}

export type ReviewState = "unreviewed" | "accepted" | "rejected" | "skipped";

export type Filter = "all" | ReviewState;

export interface QueueItem {
  source: SourceInfo;
  state: ReviewState;
  /** Candidates under the store's active model version, or null until loaded. */
  list: CandidateList | null;
}

export interface Toast {
  kind: "error" | "info";
  message: string;
}

export interface Progress {
  reviewed: number;
  total: number;
}

export interface StoreSnapshot {
  items: QueueItem[];
  filter: Filter;
  progress: Progress;
  version: string | null;
  toast: Toast | null;
  connected: boolean;
}
