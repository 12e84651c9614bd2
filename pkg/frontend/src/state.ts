// View-model layer.
//
// The console never does preference math: the view model is assembled by
// copying fields out of API responses, and `displayState` projects it onto
// the exact labelled values the panels show. Tests replay that projection
// headlessly and check each value against the capture log.

import {
  ApiClient,
  ApiError,
  CreateSessionRequest,
  EnvView,
  InteractionRecord,
  SessionDescriptor,
  StateView,
  StepResponse,
  TrajectoryView,
} from "./api.js";

export interface SessionViewModel {
  descriptor: SessionDescriptor;
  envInfo: EnvView | null;
  phase: string;
  policyId: number;
  xi: number[];
  trajectory: TrajectoryView | null;
  /** xi after each reviewed interaction, starting with the initial estimate. */
  xiHistory: number[][];
  records: InteractionRecord[];
  interactionCount: number;
  belief: Record<string, number> | null;
  populationMean: number[] | null;
  populationCount: number | null;
  /** Inline status line; always a verbatim service-provided message (or empty). */
  notice: string;
}

export function vmFromCreate(
  descriptor: SessionDescriptor,
  envs: EnvView[],
): SessionViewModel {
  return {
    descriptor,
    envInfo: envs.find((e) => e.id === descriptor.env) ?? null,
    phase: descriptor.phase,
    policyId: descriptor.policy_id,
    xi: descriptor.xi,
    trajectory: null,
    xiHistory: [descriptor.xi],
    records: [],
    interactionCount: 0,
    belief: null,
    populationMean: null,
    populationCount: null,
    notice: "",
  };
}

export function applyStep(vm: SessionViewModel, step: StepResponse): SessionViewModel {
  const records = step.record ? [...vm.records, step.record] : vm.records;
  return { ...vm, phase: step.phase, trajectory: step.trajectory, records, notice: "" };
}

export function applyReaction(
  vm: SessionViewModel,
  record: InteractionRecord,
  state: StateView,
): SessionViewModel {
  return {
    ...vm,
    phase: state.phase,
    policyId: state.policy_id,
    xi: state.xi,
    xiHistory: [...vm.xiHistory, record.xi_after],
    records: [...vm.records, record],
    interactionCount: state.interaction_count,
    belief: { ...state.belief },
    populationMean: state.population_mean,
    populationCount: state.population_count,
    notice: "",
  };
}

/** Phase violations render as a disabled-state explanation, never a crash. */
export function applyPhaseError(vm: SessionViewModel, error: ApiError): SessionViewModel {
  return { ...vm, notice: error.payload.message };
}

// ── display projection ──────────────────────────────────────────────────────

export interface DisplayState {
  /** label -> number, each taken verbatim from some captured response */
  numbers: Record<string, number>;
  /** label -> string, each appearing verbatim in some captured response */
  text: Record<string, string>;
}

export function displayState(vm: SessionViewModel): DisplayState {
  const numbers: Record<string, number> = {};
  const text: Record<string, string> = {};
  const names = vm.descriptor.front.objective_names;

  text["session.id"] = vm.descriptor.session_id;
  text["session.env"] = vm.descriptor.env;
  text["session.mode"] = vm.descriptor.mode;
  text["session.user"] = vm.descriptor.user_id;
  text["session.selector"] = vm.descriptor.selector;
  text["session.interpreter"] = vm.descriptor.interpreter_kind;
  text["session.phase"] = vm.phase;
  text["notice"] = vm.notice;

  numbers["policy.current"] = vm.policyId;
  names.forEach((name, i) => {
    numbers[`xi[${name}]`] = vm.xi[i];
    numbers[`front.utopia[${name}]`] = vm.descriptor.front.utopia[i];
  });
  for (const policy of vm.descriptor.front.policies) {
    names.forEach((name, i) => {
      numbers[`front.p${policy.policy_id}.return[${name}]`] = policy.return_vector[i];
    });
  }

  if (vm.trajectory) {
    names.forEach((name, i) => {
      numbers[`episode.return[${name}]`] = vm.trajectory!.return_vector[i];
    });
    vm.trajectory.actions.forEach((action, i) => {
      text[`episode.action[${i}]`] = action;
    });
    vm.trajectory.cells.forEach((cell, i) => {
      numbers[`episode.cell[${i}].row`] = cell[0];
      numbers[`episode.cell[${i}].col`] = cell[1];
    });
    vm.trajectory.rewards.forEach((reward, i) => {
      names.forEach((name, j) => {
        numbers[`episode.reward[${i}][${name}]`] = reward[j];
      });
    });
  }

  const last = vm.records[vm.records.length - 1];
  if (last) {
    numbers["reaction.index"] = last.index;
    numbers["reaction.zeta"] = last.zeta;
    if (last.zeta_hat !== null) numbers["reaction.zeta_hat"] = last.zeta_hat;
    if (last.true_regret !== null) numbers["reaction.regret"] = last.true_regret;
    numbers["reaction.policy_before"] = last.policy_before;
    numbers["reaction.policy_after"] = last.policy_after;
    names.forEach((name, i) => {
      numbers[`reaction.delta[${name}]`] = last.delta[i];
      numbers[`reaction.xi_before[${name}]`] = last.xi_before[i];
      numbers[`reaction.xi_after[${name}]`] = last.xi_after[i];
    });
    text["reaction.sentence"] = last.explanation.sentence;
  }

  if (vm.belief) {
    for (const key of ["mu", "kappa", "a", "b", "count"]) {
      numbers[`belief.${key}`] = vm.belief[key];
    }
  }
  numbers["session.interactions"] = vm.interactionCount;
  if (vm.populationCount !== null) {
    numbers["population.count"] = vm.populationCount;
    names.forEach((name, i) => {
      numbers[`population.mean[${name}]`] = vm.populationMean![i];
    });
  }
  return { numbers, text };
}

// ── gestures ────────────────────────────────────────────────────────────────
//
// Every state-changing thing the human can do is a gesture, and a gesture
// maps to exactly one API mutation (reads may follow to refresh the view).
// The log is replayable: running it against a fresh seeded session must
// reproduce the same sequence of displayed states.

export type Gesture =
  | { kind: "create"; request: CreateSessionRequest }
  | { kind: "run-episode" }
  | { kind: "react"; zeta: number };

export class ConsoleSession {
  vm: SessionViewModel | null = null;
  envs: EnvView[] = [];
  readonly gestures: Gesture[] = [];
  readonly snapshots: DisplayState[] = [];

  constructor(readonly api: ApiClient) {}

  async init(): Promise<EnvView[]> {
    this.envs = await this.api.listEnvs();
    return this.envs;
  }

  private get sessionId(): string {
    if (!this.vm) throw new Error("no active session");
    return this.vm.descriptor.session_id;
  }

  async apply(gesture: Gesture): Promise<SessionViewModel> {
    switch (gesture.kind) {
      case "create": {
        const descriptor = await this.api.createSession(gesture.request);
        this.vm = vmFromCreate(descriptor, this.envs);
        break;
      }
      case "run-episode": {
        const step = await this.api.step(this.sessionId);
        this.vm = applyStep(this.vm!, step);
        break;
      }
      case "react": {
        const record = await this.api.react(this.sessionId, gesture.zeta);
        const state = await this.api.getState(this.sessionId);
        this.vm = applyReaction(this.vm!, record, state);
        break;
      }
    }
    this.gestures.push(gesture);
    this.snapshots.push(displayState(this.vm!));
    return this.vm!;
  }
}

/**
 * Re-run a recorded gesture log against a fresh session and return the
 * displayed state after each gesture. With the same seed this must be
 * identical to the snapshots of the original run.
 */
export async function replayGestures(
  api: ApiClient,
  log: readonly Gesture[],
): Promise<DisplayState[]> {
  const session = new ConsoleSession(api);
  await session.init();
  for (const gesture of log) {
    await session.apply(gesture);
  }
  return session.snapshots;
}
