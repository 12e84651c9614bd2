// Console wiring: setup form -> loop view -> audit view. One API mutation
// per user gesture; after each gesture the panels repaint from the display
// projection. Single active session per tab; calls are sequential.

import { ApiClient, ApiError } from "./api.js";
import {
  ConsoleSession,
  displayState,
  Gesture,
  replayGestures,
  SessionViewModel,
} from "./state.js";
import {
  auditToJsonLines,
  renderAuditTable,
  renderFrontScatter,
  renderGrid,
  renderKeyValues,
  renderReturnBars,
  renderSessionHeader,
  renderXiHistory,
  renderXiReadout,
} from "./render.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const api = new ApiClient("");
const session = new ConsoleSession(api);

const setupView = $("setup-view");
const loopView = $("loop-view");
const envSelect = $<HTMLSelectElement>("env-select");
const interpreterSelect = $<HTMLSelectElement>("interpreter-select");
const selectorSelect = $<HTMLSelectElement>("selector-select");
const seedInput = $<HTMLInputElement>("seed-input");
const userInput = $<HTMLInputElement>("user-input");
const setupError = $("setup-error");
const startButton = $<HTMLButtonElement>("start-button");

const sessionHeader = $("session-header");
const xiReadout = $("xi-readout");
const runButton = $<HTMLButtonElement>("run-button");
const reactionSlider = $<HTMLInputElement>("reaction-slider");
const reactionValue = $("reaction-value");
const reactButton = $<HTMLButtonElement>("react-button");
const noticeLine = $("notice-line");
const sentenceLine = $("sentence-line");
const gridCanvas = $<HTMLCanvasElement>("grid-canvas");
const returnBars = $("return-bars");
const xiCanvas = $<HTMLCanvasElement>("xi-canvas");
const frontCanvas = $<HTMLCanvasElement>("front-canvas");
const deltaReadout = $("delta-readout");
const auditContainer = $("audit-table");
const exportButton = $<HTMLButtonElement>("export-button");
const replayButton = $<HTMLButtonElement>("replay-button");
const replayResult = $("replay-result");

let playbackTimer: number | null = null;

function paint(vm: SessionViewModel): void {
  const display = displayState(vm);
  const names = vm.descriptor.front.objective_names;
  renderSessionHeader(sessionHeader, display);
  renderXiReadout(xiReadout, names, display);
  renderXiHistory(xiCanvas, vm.xiHistory, names);
  renderFrontScatter(
    frontCanvas,
    vm.descriptor.front,
    vm.policyId,
    vm.records[vm.records.length - 1] ?? null,
  );
  renderReturnBars(returnBars, names, display, vm.descriptor.front);
  renderAuditTable(auditContainer, vm.records);
  noticeLine.textContent = display.text["notice"];
  sentenceLine.textContent = display.text["reaction.sentence"] ?? "";

  const last = vm.records[vm.records.length - 1];
  renderKeyValues(
    deltaReadout,
    last
      ? names.map((name, i) => {
          const value = display.numbers[`reaction.delta[${name}]`];
          const arrow = last.delta[i] > 0 ? "▲" : last.delta[i] < 0 ? "▼" : "—";
          return [`Δ[${name}]`, `${arrow} ${String(value)}`] as [string, string];
        })
      : [],
  );

  // phase machine: exactly one of the two loop buttons is live
  runButton.disabled = vm.phase !== "awaiting-step";
  reactButton.disabled = vm.phase !== "awaiting-reaction";

  if (vm.envInfo && vm.trajectory) {
    animateTrajectory(vm);
  } else if (vm.envInfo) {
    renderGrid(gridCanvas, vm.envInfo, null, 0);
  }
}

function animateTrajectory(vm: SessionViewModel): void {
  const env = vm.envInfo!;
  const trajectory = vm.trajectory!;
  if (playbackTimer !== null) window.clearInterval(playbackTimer);
  let frame = 0;
  renderGrid(gridCanvas, env, trajectory, frame);
  playbackTimer = window.setInterval(() => {
    frame += 1;
    renderGrid(gridCanvas, env, trajectory, frame);
    if (frame >= trajectory.cells.length - 1 && playbackTimer !== null) {
      window.clearInterval(playbackTimer);
      playbackTimer = null;
    }
  }, 180);
}

async function gesture(g: Gesture): Promise<void> {
  try {
    const vm = await session.apply(g);
    paint(vm);
  } catch (err) {
    if (err instanceof ApiError && session.vm) {
      // e.g. phase violation from a double-submit: show the service's own
      // message next to the (now disabled) controls
      session.vm = { ...session.vm, notice: err.payload.message };
      paint(session.vm);
    } else {
      throw err;
    }
  }
}

startButton.addEventListener("click", async () => {
  setupError.textContent = "";
  const seed = Number(seedInput.value);
  if (!Number.isInteger(seed)) {
    setupError.textContent = "seed must be an integer";
    return;
  }
  try {
    await gesture({
      kind: "create",
      request: {
        env: envSelect.value,
        mode: "human-reaction",
        interpreter: { kind: interpreterSelect.value, ideal_mode: "utopia" },
        selector: selectorSelect.value as "argmax" | "steering",
        user_id: userInput.value || "user-0",
        seed,
      },
    });
    setupView.hidden = true;
    loopView.hidden = false;
  } catch (err) {
    if (err instanceof ApiError) {
      setupError.textContent = err.payload.message;
    } else {
      setupError.textContent = String(err);
    }
  }
});

runButton.addEventListener("click", () => gesture({ kind: "run-episode" }));

reactionSlider.addEventListener("input", () => {
  reactionValue.textContent = reactionSlider.value;
});

reactButton.addEventListener("click", () =>
  gesture({ kind: "react", zeta: Number(reactionSlider.value) }),
);

exportButton.addEventListener("click", () => {
  if (!session.vm) return;
  const blob = new Blob([auditToJsonLines(session.vm.records)], {
    type: "application/jsonl",
  });
  const link = document.createElement("a");
  link.href = URL.createObjectURL(blob);
  link.download = `${session.vm.descriptor.session_id}-audit.jsonl`;
  link.click();
  URL.revokeObjectURL(link.href);
});

replayButton.addEventListener("click", async () => {
  replayResult.textContent = "replaying…";
  try {
    const replayed = await replayGestures(new ApiClient(""), session.gestures);
    const same =
      JSON.stringify(replayed) === JSON.stringify(session.snapshots);
    replayResult.textContent = same
      ? "replay reproduced every displayed state"
      : "REPLAY DIVERGED — displayed states differ";
  } catch (err) {
    replayResult.textContent = `replay failed: ${String(err)}`;
  }
});

async function boot(): Promise<void> {
  try {
    const envs = await session.init();
    envSelect.innerHTML = "";
    for (const env of envs) {
      const option = document.createElement("option");
      option.value = env.id;
      option.textContent = env.id;
      envSelect.appendChild(option);
    }
  } catch (err) {
    setupError.textContent = `cannot reach service: ${String(err)}`;
  }
}

boot();
