/**
 * Typed client for the /api/v1 endpoints. The dashboard talks to the
 * backend exclusively through this module; every mutation carries a
 * version precondition so the client can never silently overwrite.
 */

export interface MetricsWire {
  M: number | null;
  SD: number | null;
  GF: number | null;
  IAF: number | null;
  IMF: number | null;
  EF: number | null;
  CRF: number | null;
  PI: number | null;
  GT: number;
}

export interface Envelope<T> {
  doc_type: string;
  doc_id: string;
  version: number;
  body: T;
}

export interface PatientBody {
  id: string;
  level: number;
  performance_index: number | null;
  preferences: string[];
}

export interface DoctorBody {
  id: string;
  experience: "junior" | "senior" | "expert";
  involvement: "monitor" | "guide" | "full";
}

export interface ProgressionPolicy {
  advance_threshold: number;
  regress_threshold: number;
  min_sessions_at_level: number;
}

export interface SessionSpec {
  game: string;
  level: number;
}

export interface ProgramBody {
  program_id: string;
  session_specs: SessionSpec[];
  duration_cap: number;
  progression_policy: ProgressionPolicy;
}

export interface LevelBody {
  level_number: number;
  objects: unknown[];
  max_time: number;
  try_time: number;
  tries_per_session: number;
  distractors_per_try: number;
  effects: string | null;
}

export interface GameBody {
  game_id: string;
  type: string;
  levels: LevelBody[];
}

export interface ReportSession {
  session_id: string;
  ordinal: number;
  wall_time: number;
  level: number;
  metrics: MetricsWire;
}

export interface ReportTransition {
  ordinal: number;
  session_id: string;
  wall_time: number;
  decision: string;
  from_level: number;
  to_level: number;
  pi: number | null;
  threshold: number | null;
  reason: string;
}

export interface Report {
  patient: PatientBody;
  patient_version: number;
  current_level: number;
  sessions: ReportSession[];
  transitions: ReportTransition[];
  events?: Record<string, unknown[]>;
}

export interface ListedDoc {
  doc_id: string;
  version: number;
}

/** Error envelope surfaced verbatim from the API. */
export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly details: string[];

  constructor(status: number, code: string, message: string, details: string[] = []) {
    super(message);
    this.status = status;
    this.code = code;
    this.details = details;
  }
}

async function parseError(response: Response): Promise<ApiError> {
  try {
    const payload = (await response.json()) as {
      error?: { status: number; code: string; message: string; details?: string[] };
    };
    if (payload.error) {
      return new ApiError(
        payload.error.status,
        payload.error.code,
        payload.error.message,
        payload.error.details ?? [],
      );
    }
  } catch {
    // fall through to the generic error below
  }
  return new ApiError(response.status, "bad_request", `HTTP ${response.status}`);
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    readonly doctorId: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init: RequestInit = {}): Promise<T> {
    const headers = new Headers(init.headers);
    headers.set("X-Doctor-Id", this.doctorId);
    if (init.body !== undefined) headers.set("Content-Type", "application/json");
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, { ...init, headers });
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  listPatients(): Promise<{ items: ListedDoc[] }> {
    return this.request("/api/v1/patients");
  }

  getPatient(id: string): Promise<Envelope<PatientBody>> {
    return this.request(`/api/v1/patients/${encodeURIComponent(id)}`);
  }

  getDoctor(id: string): Promise<Envelope<DoctorBody>> {
    return this.request(`/api/v1/doctors/${encodeURIComponent(id)}`);
  }

  listPrograms(): Promise<{ items: ListedDoc[] }> {
    return this.request("/api/v1/programs");
  }

  getProgram(id: string): Promise<Envelope<ProgramBody>> {
    return this.request(`/api/v1/programs/${encodeURIComponent(id)}`);
  }

  /** Version-checked save; the server answers 412 when someone else won. */
  putProgram(id: string, body: ProgramBody, version: number): Promise<Envelope<ProgramBody>> {
    return this.request(`/api/v1/programs/${encodeURIComponent(id)}`, {
      method: "PUT",
      headers: { "If-Match": String(version) },
      body: JSON.stringify(body),
    });
  }

  getGame(id: string): Promise<Envelope<GameBody>> {
    return this.request(`/api/v1/games/${encodeURIComponent(id)}`);
  }

  putGame(id: string, body: GameBody, version: number): Promise<Envelope<GameBody>> {
    return this.request(`/api/v1/games/${encodeURIComponent(id)}`, {
      method: "PUT",
      headers: { "If-Match": String(version) },
      body: JSON.stringify(body),
    });
  }

  getReport(patientId: string, includeEvents = false): Promise<Report> {
    const query = includeEvents ? "?include=events" : "";
    return this.request(`/api/v1/patients/${encodeURIComponent(patientId)}/report${query}`);
  }

  overrideLevel(
    patientId: string,
    toLevel: number,
    version: number,
  ): Promise<{ patient_id: string; level: number; version: number }> {
    return this.request(`/api/v1/patients/${encodeURIComponent(patientId)}/level-override`, {
      method: "POST",
      headers: { "If-Match": String(version) },
      body: JSON.stringify({ to_level: toLevel }),
    });
  }
}
