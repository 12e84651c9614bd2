// Typed client for the alignment session API.
//
// Every JSON body that comes back is appended to a capture log. The rest of
// the console builds its views exclusively out of captured responses —
// nothing numeric is ever computed locally — so the capture log doubles as
// the provenance trail for everything on screen.

export interface EnvView {
  id: string;
  kind: string;
  width: number;
  height: number;
  horizon: number;
  objective_names: string[];
}

export interface PolicyView {
  policy_id: number;
  anchor_weight: number[];
  scalarization: string;
  return_vector: number[];
}

export interface FrontView {
  env: string;
  objective_names: string[];
  policies: PolicyView[];
  front_order: number[];
  utopia: number[];
}

export interface SessionDescriptor {
  session_id: string;
  env: string;
  mode: string;
  phase: string;
  user_id: string;
  selector: string;
  interpreter_kind: string;
  policy_id: number;
  xi: number[];
  front: FrontView;
}

export interface TrajectoryView {
  cells: number[][];
  actions: string[];
  rewards: number[][];
  return_vector: number[];
  terminated: boolean;
}

export interface SelectionExplanation {
  interaction_index: number;
  zeta: number;
  zeta_hat: number | null;
  delta: number[];
  xi_before: number[];
  xi_after: number[];
  policy_before: number;
  policy_after: number;
  return_before: number[];
  return_after: number[];
  selector_kind: string;
  changed: boolean;
  sentence: string;
}

export interface InteractionRecord {
  schema_version: number;
  index: number;
  user_id: string;
  policy_before: number;
  policy_after: number;
  return_observed: number[];
  zeta: number;
  zeta_hat: number | null;
  delta: number[];
  xi_before: number[];
  xi_after: number[];
  true_regret: number | null;
  reviewed: boolean;
  explanation: SelectionExplanation;
}

export interface StepResponse {
  phase: string;
  trajectory: TrajectoryView;
  record: InteractionRecord | null;
}

export interface BeliefView {
  mu0: number;
  kappa0: number;
  a0: number;
  b0: number;
  mu: number;
  kappa: number;
  a: number;
  b: number;
  count: number;
}

export interface StateView {
  session_id: string;
  env: string;
  mode: string;
  phase: string;
  user_id: string;
  selector: string;
  interpreter_kind: string;
  policy_id: number;
  xi: number[];
  interaction_count: number;
  belief: BeliefView;
  population_mean: number[];
  population_count: number;
}

export interface AuditResponse {
  session_id: string;
  records: InteractionRecord[];
}

export interface CreateSessionRequest {
  env?: string;
  mode?: "human-reaction" | "simulated-user";
  interpreter?: Record<string, unknown>;
  selector?: "argmax" | "steering";
  user_id?: string;
  simulated_user?: Record<string, unknown> | null;
  seed?: number;
  review_every_k?: number;
}

export interface ErrorPayload {
  code: string;
  message: string;
  field_path?: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly payload: ErrorPayload,
  ) {
    super(`${payload.code}: ${payload.message}`);
    this.name = "ApiError";
  }
}

export interface CapturedResponse {
  method: string;
  path: string;
  status: number;
  body: unknown;
}

export class ApiClient {
  readonly captured: CapturedResponse[] = [];

  constructor(private readonly baseUrl: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await fetch(this.baseUrl + path, init);
    const parsed: unknown = await resp.json();
    this.captured.push({ method, path, status: resp.status, body: parsed });
    if (!resp.ok) {
      throw new ApiError(resp.status, parsed as ErrorPayload);
    }
    return parsed as T;
  }

  /** Number of state-changing calls issued so far (one per user gesture). */
  mutationCount(): number {
    return this.captured.filter((c) => c.method !== "GET").length;
  }

  listEnvs(): Promise<EnvView[]> {
    return this.request("GET", "/api/envs");
  }

  getFront(envId: string): Promise<FrontView> {
    return this.request("GET", `/api/front/${envId}`);
  }

  createSession(req: CreateSessionRequest): Promise<SessionDescriptor> {
    return this.request("POST", "/api/sessions", req);
  }

  step(sessionId: string): Promise<StepResponse> {
    return this.request("POST", `/api/sessions/${sessionId}/step`);
  }

  react(sessionId: string, zeta: number): Promise<InteractionRecord> {
    return this.request("POST", `/api/sessions/${sessionId}/reaction`, { zeta });
  }

  getState(sessionId: string): Promise<StateView> {
    return this.request("GET", `/api/sessions/${sessionId}/state`);
  }

  getAudit(sessionId: string): Promise<AuditResponse> {
    return this.request("GET", `/api/sessions/${sessionId}/audit`);
  }

  closeSession(sessionId: string): Promise<{ session_id: string; phase: string }> {
    return this.request("DELETE", `/api/sessions/${sessionId}`);
  }
}
