/**
 * Pure UI state: a function of the latest outcome view plus local input
 * state. No grounding logic lives here; the service decides, the UI shows.
 */

import type { OutcomeView, SceneDoc, TranscriptEntry } from "./types.js";

/** Box overlays derived from the latest view (Fig.-style conventions:
 * red = selected referent, blue dashed = open candidates, one candidate
 * emphasized as the question's target — the pointing analog). */
export interface Overlays {
  selected: string | null;
  candidates: string[];
  emphasized: string | null;
}

export interface UiState {
  sessionId: string | null;
  scene: SceneDoc | null;
  revision: number;
  dialogOpen: boolean;
  busy: boolean;
  overlays: Overlays;
  questionText: string | null;
  lastView: OutcomeView | null;
  transcript: TranscriptEntry[];
  error: string | null;
}

export function initialState(): UiState {
  return {
    sessionId: null,
    scene: null,
    revision: 0,
    dialogOpen: false,
    busy: false,
    overlays: { selected: null, candidates: [], emphasized: null },
    questionText: null,
    lastView: null,
    transcript: [],
    error: null,
  };
}

export function sessionStarted(state: UiState, id: string, scene: SceneDoc,
                               revision: number): UiState {
  return {
    ...initialState(),
    sessionId: id,
    scene,
    revision,
  };
}

export function overlaysFor(view: OutcomeView): Overlays {
  switch (view.kind) {
    case "unique":
    case "resolved":
      return { selected: view.selected ?? null, candidates: [], emphasized: null };
    case "question":
    case "narrowed":
      return {
        selected: null,
        candidates: view.candidates ?? [],
        emphasized: view.question?.target ?? null,
      };
    default:
      return { selected: null, candidates: [], emphasized: null };
  }
}

/** Every overlay id must name a region of the current scene. */
export function validateOverlays(overlays: Overlays, scene: SceneDoc): string[] {
  const known = new Set(scene.regions.map((r) => r.id));
  const bad: string[] = [];
  for (const id of overlays.candidates) if (!known.has(id)) bad.push(id);
  if (overlays.selected && !known.has(overlays.selected)) bad.push(overlays.selected);
  if (overlays.emphasized && !known.has(overlays.emphasized)) bad.push(overlays.emphasized);
  return bad;
}

/** Fold an outcome view into the state; stale revisions are ignored. */
export function applyView(state: UiState, view: OutcomeView): UiState {
  if (view.revision <= state.revision) return state;
  if (state.scene) {
    const bad = validateOverlays(overlaysFor(view), state.scene);
    if (bad.length > 0) {
      return { ...state, error: `view names unknown regions: ${bad.join(", ")}` };
    }
  }
  return {
    ...state,
    revision: view.revision,
    dialogOpen: view.kind === "question" || view.kind === "narrowed",
    overlays: overlaysFor(view),
    questionText: view.question?.text ?? null,
    lastView: view,
    error: null,
  };
}

/** Route user text to the right endpoint based on the dialog-open flag. */
export function routeFor(state: UiState): "instruction" | "response" {
  return state.dialogOpen ? "response" : "instruction";
}

/** The input lock: a submission is accepted only when idle. */
export function beginSubmit(state: UiState): UiState | null {
  if (state.busy || !state.sessionId) return null;
  return { ...state, busy: true };
}

export function endSubmit(state: UiState, error?: string): UiState {
  return { ...state, busy: false, error: error ?? state.error };
}

export function appendTranscript(state: UiState, entry: TranscriptEntry): UiState {
  return { ...state, transcript: [...state.transcript, entry] };
}
