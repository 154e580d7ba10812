/**
 * Pure view-model logic, kept free of DOM and network so it is unit
 * testable. The dashboard performs no metric arithmetic: every number
 * shown is the API value verbatim, and an absent measure renders as an
 * em dash, visibly distinct from zero.
 */

import type {
  DoctorBody,
  MetricsWire,
  ProgramBody,
  Report,
  ReportTransition,
} from "./api.js";

export const ABSENT = "—"; // em dash

export const METRIC_KEYS = ["M", "SD", "GF", "IAF", "IMF", "EF", "CRF", "PI", "GT"] as const;
export type MetricKey = (typeof METRIC_KEYS)[number];

/** Verbatim display: no rounding, no arithmetic, absent is a dash. */
export function formatMetric(value: number | null | undefined): string {
  if (value === null || value === undefined) return ABSENT;
  return String(value);
}

export interface SessionRow {
  sessionId: string;
  ordinal: number;
  level: number;
  cells: Record<MetricKey, string>;
}

export interface TrendPoint {
  ordinal: number;
  pi: number;
}

export interface TransitionRow {
  ordinal: number;
  label: string;
  reason: string;
}

export interface ReportView {
  patientId: string;
  patientVersion: number;
  currentLevel: number;
  performanceIndex: string;
  rows: SessionRow[];
  trend: TrendPoint[];
  transitions: TransitionRow[];
}

function metricCells(metrics: MetricsWire): Record<MetricKey, string> {
  const cells = {} as Record<MetricKey, string>;
  for (const key of METRIC_KEYS) cells[key] = formatMetric(metrics[key]);
  return cells;
}

function transitionLabel(t: ReportTransition): string {
  if (t.decision === "override") return `override ${t.from_level} → ${t.to_level}`;
  if (t.from_level === t.to_level) return `${t.decision} at ${t.from_level}`;
  return `${t.decision} ${t.from_level} → ${t.to_level}`;
}

/** Order the series by session time and project it for rendering. */
export function buildReportView(report: Report): ReportView {
  const sessions = [...report.sessions].sort(
    (a, b) => a.wall_time - b.wall_time || a.ordinal - b.ordinal,
  );
  const trend: TrendPoint[] = [];
  for (const session of sessions) {
    if (session.metrics.PI !== null) {
      trend.push({ ordinal: session.ordinal, pi: session.metrics.PI });
    }
  }
  return {
    patientId: report.patient.id,
    patientVersion: report.patient_version,
    currentLevel: report.current_level,
    performanceIndex: formatMetric(report.patient.performance_index),
    rows: sessions.map((s) => ({
      sessionId: s.session_id,
      ordinal: s.ordinal,
      level: s.level,
      cells: metricCells(s.metrics),
    })),
    trend,
    transitions: [...report.transitions]
      .sort((a, b) => a.ordinal - b.ordinal)
      .map((t) => ({ ordinal: t.ordinal, label: transitionLabel(t), reason: t.reason })),
  };
}

/** Raw event access follows the doctor's experience, mirrored from the
 * server's gate; the tab simply does not exist below senior. */
export function eventsTabVisible(doctor: DoctorBody): boolean {
  return doctor.experience === "senior" || doctor.experience === "expert";
}

// ---------------------------------------------------------------------------
// plan editor
// ---------------------------------------------------------------------------

export interface PlanEdits {
  advanceThreshold: number;
  regressThreshold: number;
  minSessionsAtLevel: number;
}

/** Mirrors the server-side policy invariants so obviously bad saves are
 * stopped in the form; the server remains the authority. */
export function validatePlanEdits(edits: PlanEdits): string[] {
  const errors: string[] = [];
  if (!(edits.advanceThreshold > 0 && edits.advanceThreshold <= 1)) {
    errors.push("advance threshold must lie in (0, 1]");
  }
  if (!(edits.regressThreshold >= 0)) {
    errors.push("regress threshold must be at least 0");
  }
  if (!(edits.regressThreshold < edits.advanceThreshold)) {
    errors.push("regress threshold must stay strictly below the advance threshold");
  }
  if (!(Number.isInteger(edits.minSessionsAtLevel) && edits.minSessionsAtLevel >= 1)) {
    errors.push("minimum sessions per level must be a whole number of at least 1");
  }
  return errors;
}

export interface LevelEdits {
  tryTime: number;
  triesPerSession: number;
  maxTime: number;
  distractorsPerTry: number;
  objectCount: number;
}

export function validateLevelEdits(edits: LevelEdits): string[] {
  const errors: string[] = [];
  if (!(edits.tryTime > 0)) errors.push("per-try budget must be positive");
  if (!(Number.isInteger(edits.triesPerSession) && edits.triesPerSession >= 1)) {
    errors.push("tries per session must be a whole number of at least 1");
  }
  if (!(edits.maxTime > 0)) errors.push("level budget must be positive");
  if (edits.tryTime > 0 && edits.triesPerSession >= 1 && edits.tryTime * edits.triesPerSession > edits.maxTime) {
    errors.push("per-try budget times tries must fit into the level budget");
  }
  if (!(Number.isInteger(edits.distractorsPerTry) && edits.distractorsPerTry >= 0)) {
    errors.push("distractors per try must be a whole number of at least 0");
  } else if (edits.distractorsPerTry + 1 > edits.objectCount) {
    errors.push("distractors per try plus the target must fit the object pool");
  }
  return errors;
}

export function applyPlanEdits(program: ProgramBody, edits: PlanEdits): ProgramBody {
  return {
    ...program,
    progression_policy: {
      advance_threshold: edits.advanceThreshold,
      regress_threshold: edits.regressThreshold,
      min_sessions_at_level: edits.minSessionsAtLevel,
    },
  };
}

// ---------------------------------------------------------------------------
// level override control
// ---------------------------------------------------------------------------

export interface OverrideControl {
  visible: boolean;
  canAdvance: boolean;
  canRegress: boolean;
}

/** Monitor-only doctors never see the control; at the range bounds the
 * corresponding direction is disabled. */
export function overrideControl(
  doctor: DoctorBody,
  currentLevel: number,
  maxLevel: number,
): OverrideControl {
  const visible = doctor.involvement === "guide" || doctor.involvement === "full";
  return {
    visible,
    canAdvance: visible && currentLevel < maxLevel,
    canRegress: visible && currentLevel > 1,
  };
}

// ---------------------------------------------------------------------------
// polling
// ---------------------------------------------------------------------------

export const POLL_INTERVAL_MS = 5000;

export interface PollState<T> {
  data: T | null;
  stale: boolean;
  error: string | null;
}

export function initialPoll<T>(): PollState<T> {
  return { data: null, stale: false, error: null };
}

/** Success replaces the data; failure keeps the last data but flags it
 * stale so the doctor knows the numbers may be old. */
export function pollReduce<T>(
  state: PollState<T>,
  result: { ok: true; data: T } | { ok: false; error: string },
): PollState<T> {
  if (result.ok) return { data: result.data, stale: false, error: null };
  return { data: state.data, stale: state.data !== null, error: result.error };
}
