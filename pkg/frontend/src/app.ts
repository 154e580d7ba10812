/**
 * DOM wiring for the doctor dashboard. All decision logic lives in
 * model.ts; this file only renders state and forwards user actions to
 * the API client. Data arrives by polling the report endpoint on a
 * fixed interval.
 */

import { ApiClient, ApiError, type DoctorBody, type GameBody, type ProgramBody, type Report } from "./api.js";
import { trendChartSvg } from "./chart.js";
import {
  ABSENT,
  METRIC_KEYS,
  POLL_INTERVAL_MS,
  applyPlanEdits,
  buildReportView,
  eventsTabVisible,
  initialPoll,
  overrideControl,
  pollReduce,
  validatePlanEdits,
  type PollState,
} from "./model.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

interface AppState {
  client: ApiClient | null;
  doctor: DoctorBody | null;
  patientId: string | null;
  report: PollState<Report>;
  program: { body: ProgramBody; version: number } | null;
  game: GameBody | null;
  timer: number | null;
  showEvents: boolean;
}

const state: AppState = {
  client: null,
  doctor: null,
  patientId: null,
  report: initialPoll<Report>(),
  program: null,
  game: null,
  timer: null,
  showEvents: false,
};

// ---------------------------------------------------------------------------
// rendering
// ---------------------------------------------------------------------------

function renderStatus(message: string, kind: "ok" | "warn" | "error" = "ok"): void {
  const banner = el<HTMLDivElement>("status");
  banner.textContent = message;
  banner.dataset.kind = kind;
}

function renderReport(): void {
  const container = el<HTMLDivElement>("monitor");
  const staleBadge = el<HTMLSpanElement>("stale-indicator");
  staleBadge.hidden = !state.report.stale;

  const report = state.report.data;
  if (!report) {
    container.innerHTML = '<p class="empty">no patient selected or no data yet</p>';
    return;
  }
  const view = buildReportView(report);

  const summary = `
    <div class="summary">
      <span><strong>${view.patientId}</strong></span>
      <span>level ${view.currentLevel}</span>
      <span>performance index ${view.performanceIndex}</span>
      <span>doc v${view.patientVersion}</span>
    </div>`;

  const chart = trendChartSvg(view.trend);

  const header = ["session", "level", ...METRIC_KEYS]
    .map((k) => `<th>${k}</th>`)
    .join("");
  const rows = view.rows
    .map((row) => {
      const cells = METRIC_KEYS.map((key) => `<td>${row.cells[key]}</td>`).join("");
      return `<tr data-session="${row.sessionId}"><td>#${row.ordinal} ${row.sessionId}</td><td>${row.level}</td>${cells}</tr>`;
    })
    .join("");
  const table =
    view.rows.length > 0
      ? `<table class="metrics"><thead><tr>${header}</tr></thead><tbody>${rows}</tbody></table>`
      : '<p class="empty">no sessions recorded for this patient yet</p>';

  const transitions = view.transitions.length
    ? `<ul class="transitions">${view.transitions
        .map((t) => `<li>#${t.ordinal} ${t.label} <span class="reason">${t.reason}</span></li>`)
        .join("")}</ul>`
    : '<p class="empty">no level transitions yet</p>';

  const eventsSection =
    state.doctor && eventsTabVisible(state.doctor)
      ? `<details id="events-tab" ${state.showEvents ? "open" : ""}>
           <summary>raw events</summary>
           <pre id="events-pre">${
             report.events ? escapeHtml(JSON.stringify(report.events, null, 2)) : "open to load"
           }</pre>
         </details>`
      : "";

  container.innerHTML = summary + chart + table + "<h3>transitions</h3>" + transitions + eventsSection;

  const tab = document.getElementById("events-tab");
  if (tab) {
    tab.addEventListener("toggle", () => {
      state.showEvents = (tab as HTMLDetailsElement).open;
      if (state.showEvents && !report.events) void refreshReport(true);
    });
  }
  renderOverride();
}

function escapeHtml(text: string): string {
  return text.replace(/[&<>]/g, (c) => ({ "&": "&amp;", "<": "&lt;", ">": "&gt;" }[c] as string));
}

function renderOverride(): void {
  const box = el<HTMLDivElement>("override");
  const report = state.report.data;
  if (!state.doctor || !report || !state.game) {
    box.hidden = true;
    return;
  }
  const maxLevel = state.game.levels.length;
  const control = overrideControl(state.doctor, report.current_level, maxLevel);
  box.hidden = !control.visible;
  if (!control.visible) return;
  el<HTMLButtonElement>("override-advance").disabled = !control.canAdvance;
  el<HTMLButtonElement>("override-regress").disabled = !control.canRegress;
  el<HTMLSpanElement>("override-level").textContent = `level ${report.current_level} of ${maxLevel}`;
}

function renderPlanForm(): void {
  const form = el<HTMLFormElement>("plan-form");
  const program = state.program;
  form.hidden = program === null;
  el<HTMLDivElement>("plan-conflict").hidden = true;
  if (!program) return;
  const policy = program.body.progression_policy;
  el<HTMLInputElement>("plan-advance").value = String(policy.advance_threshold);
  el<HTMLInputElement>("plan-regress").value = String(policy.regress_threshold);
  el<HTMLInputElement>("plan-min-sessions").value = String(policy.min_sessions_at_level);
  el<HTMLSpanElement>("plan-version").textContent = `v${program.version}`;
  validatePlanForm();
}

function readPlanEdits() {
  return {
    advanceThreshold: Number(el<HTMLInputElement>("plan-advance").value),
    regressThreshold: Number(el<HTMLInputElement>("plan-regress").value),
    minSessionsAtLevel: Number(el<HTMLInputElement>("plan-min-sessions").value),
  };
}

function validatePlanForm(): string[] {
  const errors = validatePlanEdits(readPlanEdits());
  el<HTMLUListElement>("plan-errors").innerHTML = errors
    .map((e) => `<li>${e}</li>`)
    .join("");
  el<HTMLButtonElement>("plan-save").disabled = errors.length > 0;
  return errors;
}

// ---------------------------------------------------------------------------
// actions
// ---------------------------------------------------------------------------

async function refreshReport(includeEvents = false): Promise<void> {
  if (!state.client || !state.patientId) return;
  try {
    const data = await state.client.getReport(
      state.patientId,
      includeEvents && state.showEvents,
    );
    state.report = pollReduce(state.report, { ok: true, data });
  } catch (error) {
    state.report = pollReduce(state.report, { ok: false, error: String(error) });
  }
  renderReport();
}

function startPolling(): void {
  if (state.timer !== null) window.clearInterval(state.timer);
  state.timer = window.setInterval(() => void refreshReport(state.showEvents), POLL_INTERVAL_MS);
}

async function connect(): Promise<void> {
  const baseUrl = el<HTMLInputElement>("base-url").value.replace(/\/$/, "");
  const doctorId = el<HTMLInputElement>("doctor-id").value.trim();
  if (!doctorId) {
    renderStatus("doctor id is required", "error");
    return;
  }
  const client = new ApiClient(baseUrl, doctorId);
  try {
    state.doctor = (await client.getDoctor(doctorId)).body;
    state.client = client;
    renderStatus(
      `connected as ${doctorId} (${state.doctor.experience}, ${state.doctor.involvement})`,
    );
  } catch (error) {
    renderStatus(`cannot connect: ${String(error)}`, "error");
    return;
  }

  const patients = await client.listPatients();
  const select = el<HTMLSelectElement>("patient-select");
  select.innerHTML = patients.items
    .map((p) => `<option value="${p.doc_id}">${p.doc_id}</option>`)
    .join("");
  const first = patients.items[0];
  state.patientId = first ? first.doc_id : null;

  const programs = await client.listPrograms();
  const programSelect = el<HTMLSelectElement>("program-select");
  programSelect.innerHTML = programs.items
    .map((p) => `<option value="${p.doc_id}">${p.doc_id}</option>`)
    .join("");
  const firstProgram = programs.items[0];
  if (firstProgram) await loadProgram(firstProgram.doc_id);

  await refreshReport();
  startPolling();
}

async function loadProgram(programId: string): Promise<void> {
  if (!state.client) return;
  const envelope = await state.client.getProgram(programId);
  state.program = { body: envelope.body, version: envelope.version };
  const spec = envelope.body.session_specs[0];
  state.game = spec ? (await state.client.getGame(spec.game)).body : null;
  renderPlanForm();
  renderOverride();
}

async function savePlan(): Promise<void> {
  if (!state.client || !state.program) return;
  if (validatePlanForm().length > 0) return;
  const updated = applyPlanEdits(state.program.body, readPlanEdits());
  try {
    const envelope = await state.client.putProgram(
      updated.program_id,
      updated,
      state.program.version,
    );
    state.program = { body: envelope.body, version: envelope.version };
    renderPlanForm();
    renderStatus(`plan saved as v${envelope.version}`);
  } catch (error) {
    if (error instanceof ApiError && error.code === "version_conflict") {
      el<HTMLDivElement>("plan-conflict").hidden = false;
    } else {
      renderStatus(String(error), "error");
    }
  }
}

async function override(direction: 1 | -1): Promise<void> {
  const report = state.report.data;
  if (!state.client || !state.patientId || !report) return;
  try {
    await state.client.overrideLevel(
      state.patientId,
      report.current_level + direction,
      report.patient_version,
    );
    renderStatus("level override applied");
    await refreshReport();
  } catch (error) {
    if (error instanceof ApiError && error.status === 412) {
      renderStatus("override lost a race with another update; data refreshed", "warn");
      await refreshReport();
    } else {
      renderStatus(String(error), "error");
    }
  }
}

// ---------------------------------------------------------------------------
// bootstrapping
// ---------------------------------------------------------------------------

export function start(): void {
  el<HTMLButtonElement>("connect").addEventListener("click", () => void connect());
  el<HTMLSelectElement>("patient-select").addEventListener("change", (event) => {
    state.patientId = (event.target as HTMLSelectElement).value;
    state.report = initialPoll<Report>();
    state.showEvents = false;
    void refreshReport();
  });
  el<HTMLSelectElement>("program-select").addEventListener("change", (event) => {
    void loadProgram((event.target as HTMLSelectElement).value);
  });
  for (const id of ["plan-advance", "plan-regress", "plan-min-sessions"]) {
    el<HTMLInputElement>(id).addEventListener("input", () => validatePlanForm());
  }
  el<HTMLFormElement>("plan-form").addEventListener("submit", (event) => {
    event.preventDefault();
    void savePlan();
  });
  el<HTMLButtonElement>("plan-reload").addEventListener("click", () => {
    if (state.program) void loadProgram(state.program.body.program_id);
  });
  el<HTMLButtonElement>("override-advance").addEventListener("click", () => void override(1));
  el<HTMLButtonElement>("override-regress").addEventListener("click", () => void override(-1));
}

if (typeof document !== "undefined" && document.getElementById("connect")) {
  start();
}
