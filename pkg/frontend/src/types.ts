/** Wire types for the grounding service API. */

export interface RegionAttrs {
  category: string;
  color: string;
  size: string;
  texture?: string | null;
  label?: string | null;
}

export interface RegionDoc {
  id: string;
  box: [number, number, number, number];
  attrs: RegionAttrs;
  centroid: [number, number, number];
}

export interface SceneDoc {
  image: { w: number; h: number };
  viewpoints: Record<string, unknown>;
  regions: RegionDoc[];
}

export interface QuestionInfo {
  text: string;
  target: string;
  kind: "self-referential" | "relational";
}

export interface ScoreEntry {
  region: string;
  cel: number;
  meteor: number;
  decoded: string;
}

export interface PairEntry {
  referred: string;
  context: string;
  cel: number;
  meteor: number;
  decoded: string;
}

export interface ScoreTrace {
  stage: string;
  relevant_ids: string[];
  self: ScoreEntry[];
  pairs: PairEntry[];
  relevant_pairs: [string, string][];
}

/** Outcome view returned by instruction/response endpoints and SSE events. */
export interface OutcomeView {
  revision: number;
  kind: "unique" | "question" | "narrowed" | "resolved" | "exhausted" | "created";
  selected?: string | null;
  question?: QuestionInfo;
  candidates?: string[];
  trace?: ScoreTrace;
}

export interface SessionCreated {
  id: string;
  revision: number;
  scene: SceneDoc;
}

export interface SessionState {
  id: string;
  revision: number;
  scene: SceneDoc;
  dialog_open: boolean;
  last: OutcomeView | null;
  transcript: TranscriptEntry[];
}

export interface TranscriptEntry {
  revision: number;
  role: "user" | "robot";
  text: string;
  state_hash?: string;
  timestamp?: number;
}

export interface SseEvent {
  revision: number;
  type: string;
  view: OutcomeView;
}
