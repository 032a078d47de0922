/** DOM wiring: session bootstrap, input handling, SSE reconciliation. */

import { ServiceClient, ServiceError } from "./client.js";
import { renderScene } from "./render.js";
import type { OutcomeView, SceneDoc, ScoreTrace } from "./types.js";
import {
  appendTranscript, applyView, beginSubmit, endSubmit, initialState, routeFor,
  sessionStarted, UiState,
} from "./viewmodel.js";

const SERVICE_URL =
  new URLSearchParams(location.search).get("service") ?? "http://127.0.0.1:8008";

const client = new ServiceClient(SERVICE_URL);
let state: UiState = initialState();
let eventAbort: AbortController | null = null;

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const questionEl = document.getElementById("question") as HTMLDivElement;
const transcriptEl = document.getElementById("transcript") as HTMLUListElement;
const traceEl = document.getElementById("trace") as HTMLPreElement;
const inputEl = document.getElementById("say") as HTMLInputElement;
const sendEl = document.getElementById("send") as HTMLButtonElement;
const statusEl = document.getElementById("status") as HTMLDivElement;
const fileEl = document.getElementById("scene-file") as HTMLInputElement;

function redraw(): void {
  if (state.scene) {
    canvas.width = state.scene.image.w;
    canvas.height = state.scene.image.h;
    const ctx = canvas.getContext("2d");
    if (ctx) renderScene(ctx, state.scene, state.overlays);
  }
  questionEl.textContent = state.questionText ?? "";
  questionEl.style.display = state.questionText ? "block" : "none";
  statusEl.textContent = state.error ?? (state.busy ? "thinking..." : "");
  inputEl.disabled = state.busy || !state.sessionId;
  sendEl.disabled = state.busy || !state.sessionId;
  transcriptEl.replaceChildren(
    ...state.transcript.map((entry) => {
      const li = document.createElement("li");
      li.className = entry.role;
      li.textContent = `${entry.role === "user" ? "you" : "robot"}: ${entry.text}`;
      return li;
    }),
  );
  traceEl.textContent = formatTrace(state.lastView);
}

function formatTrace(view: OutcomeView | null): string {
  const trace: ScoreTrace | undefined = view?.trace;
  if (!trace) return "";
  const lines = [`stage: ${trace.stage}`, `relevant: ${trace.relevant_ids.join(", ")}`];
  for (const s of trace.self) {
    lines.push(`  ${s.region}  cel=${s.cel.toFixed(3)} meteor=${s.meteor.toFixed(3)}  "${s.decoded}"`);
  }
  if (trace.pairs.length) lines.push("pairs:");
  for (const p of trace.pairs) {
    lines.push(`  (${p.referred}, ${p.context})  cel=${p.cel.toFixed(3)} meteor=${p.meteor.toFixed(3)}`);
  }
  return lines.join("\n");
}

function update(next: UiState): void {
  state = next;
  redraw();
}

async function subscribe(sessionId: string): Promise<void> {
  eventAbort?.abort();
  eventAbort = new AbortController();
  try {
    await client.events(
      sessionId,
      (event) => {
        if (event.type === "resolved" || event.type === "question-asked"
            || event.type === "narrowed" || event.type === "exhausted") {
          update(applyView(state, event.view));
        }
      },
      { since: state.revision, signal: eventAbort.signal },
    );
  } catch {
    // stream closed (navigation or server shutdown); polling still works
  }
}

async function startSession(scene: SceneDoc): Promise<void> {
  const created = await client.createSession(scene);
  update(sessionStarted(state, created.id, created.scene, created.revision));
  void subscribe(created.id);
}

async function submit(): Promise<void> {
  const text = inputEl.value.trim();
  if (!text) return;
  const locked = beginSubmit(state);
  if (!locked) return; // double-submit rejected client-side
  update(locked);
  const route = routeFor(state);
  try {
    const view =
      route === "response"
        ? await client.submitResponse(state.sessionId!, text)
        : await client.submitInstruction(state.sessionId!, text);
    let next = appendTranscript(state, {
      revision: view.revision, role: "user", text,
    });
    if (view.question) {
      next = appendTranscript(next, {
        revision: view.revision, role: "robot", text: view.question.text,
      });
    } else if (view.kind === "resolved" || view.kind === "unique") {
      next = appendTranscript(next, {
        revision: view.revision, role: "robot",
        text: `selected ${view.selected}`,
      });
    }
    update(endSubmit(applyView(next, view)));
    inputEl.value = "";
  } catch (error) {
    const detail = error instanceof ServiceError ? error.message : String(error);
    update(endSubmit(state, detail));
  }
}

sendEl.addEventListener("click", () => void submit());
inputEl.addEventListener("keydown", (event) => {
  if (event.key === "Enter") void submit();
});
fileEl.addEventListener("change", async () => {
  const file = fileEl.files?.[0];
  if (!file) return;
  try {
    await startSession(JSON.parse(await file.text()) as SceneDoc);
  } catch (error) {
    update({ ...state, error: String(error) });
  }
});

document.getElementById("demo")?.addEventListener("click", async () => {
  const response = await fetch("./demo_scene.json");
  await startSession((await response.json()) as SceneDoc);
});

redraw();
