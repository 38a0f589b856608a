/**
 * Pure view state for the dashboard.
 *
 * The view renders only what snapshots carry - it never simulates robot
 * state locally, so reloading the page reproduces the same view from
 * the next snapshot. Reducers return fresh objects; the render layer
 * diffs against the previous view.
 */

export interface ActiveEntry {
  machine: string;
  state: string;
  variables: Record<string, unknown>;
}

export interface Snapshot {
  tick: number;
  paused: boolean;
  mode: string;
  active: ActiveEntry[];
  pose: { x: number; y: number; theta: number; collided: boolean };
  scan: {
    angle_min: number;
    angle_increment: number;
    range_max: number;
    ranges: number[];
  } | null;
  world: { segments: number[][] };
  nodes: { name: string; lifecycle: string; subscribes: string[]; publishes: string[] }[];
  diagnostics: Record<string, unknown>[];
  source: string;
}

export interface ErrorMarker {
  message: string;
  line: number | null;
  col: number | null;
}

export interface UpdateOutcome {
  kind: string;
  preserved: string[];
  respawned: string[];
  idled: string[];
  spawned: string[];
  diagnostics: { message: string; line?: number; col?: number }[];
}

export interface SessionView {
  connection: "connecting" | "connected" | "reconnecting" | "closed";
  snapshot: Snapshot | null;
  snapshotCount: number;
  editorText: string;
  editorDirty: boolean;
  errorMarker: ErrorMarker | null;
  lastOutcome: UpdateOutcome | null;
}

export function initialView(): SessionView {
  return {
    connection: "connecting",
    snapshot: null,
    snapshotCount: 0,
    editorText: "",
    editorDirty: false,
    errorMarker: null,
    lastOutcome: null,
  };
}

export function onConnection(view: SessionView, status: SessionView["connection"]): SessionView {
  return { ...view, connection: status };
}

/** A snapshot refreshes everything except an editor the user is typing in. */
export function onSnapshot(view: SessionView, snapshot: Snapshot): SessionView {
  const editorText = view.editorDirty ? view.editorText : snapshot.source;
  return {
    ...view,
    snapshot,
    snapshotCount: view.snapshotCount + 1,
    editorText,
  };
}

export function onEditorInput(view: SessionView, text: string): SessionView {
  const runningSource = view.snapshot?.source ?? "";
  return { ...view, editorText: text, editorDirty: text !== runningSource };
}

/** Apply the reply to a source submission. */
export function onOutcome(view: SessionView, outcome: UpdateOutcome): SessionView {
  if (outcome.kind === "rejected_parse_error") {
    const diag = outcome.diagnostics[0];
    const marker: ErrorMarker = {
      message: diag?.message ?? "parse error",
      line: diag?.line ?? null,
      col: diag?.col ?? null,
    };
    // rejected: running program unchanged, editor content preserved
    return { ...view, lastOutcome: outcome, errorMarker: marker };
  }
  return { ...view, lastOutcome: outcome, errorMarker: null, editorDirty: false };
}

/** Exactly one state per machine: snapshots list each machine once. */
export function highlightedStates(view: SessionView): Map<string, string> {
  const highlights = new Map<string, string>();
  for (const entry of view.snapshot?.active ?? []) {
    highlights.set(entry.machine, entry.state);
  }
  return highlights;
}

/** Flattened variables of the outermost machine plus globals, for the panel. */
export function visibleVariables(view: SessionView): Record<string, unknown> {
  const entries = view.snapshot?.active ?? [];
  if (entries.length === 0) return {};
  // the last entry is the outermost machine; it already includes globals
  return entries[entries.length - 1].variables;
}
