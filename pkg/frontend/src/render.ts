// DOM and canvas painting. Values on screen come straight from the display
// projection (raw response values via String()); everything else here is
// geometry.

import { FrontView, InteractionRecord, TrajectoryView, EnvView } from "./api.js";
import { DisplayState } from "./state.js";

const fmt = (n: number): string => String(n);

const OBJECTIVE_COLORS = ["#2b8a3e", "#1864ab", "#e8590c", "#862e9c"];

export function renderKeyValues(
  el: HTMLElement,
  entries: Array<[string, string]>,
): void {
  el.innerHTML = "";
  for (const [label, value] of entries) {
    const row = document.createElement("div");
    row.className = "kv-row";
    const k = document.createElement("span");
    k.className = "kv-key";
    k.textContent = label;
    const v = document.createElement("span");
    v.className = "kv-value";
    v.textContent = value;
    row.append(k, v);
    el.appendChild(row);
  }
}

export function renderSessionHeader(el: HTMLElement, display: DisplayState): void {
  renderKeyValues(el, [
    ["session", display.text["session.id"]],
    ["env", display.text["session.env"]],
    ["user", display.text["session.user"]],
    ["interpreter", display.text["session.interpreter"]],
    ["selector", display.text["session.selector"]],
    ["phase", display.text["session.phase"]],
    ["policy", fmt(display.numbers["policy.current"])],
    ["interactions", fmt(display.numbers["session.interactions"])],
  ]);
}

export function renderXiReadout(
  el: HTMLElement,
  names: string[],
  display: DisplayState,
): void {
  renderKeyValues(
    el,
    names.map((name) => [`Ξ[${name}]`, fmt(display.numbers[`xi[${name}]`])]),
  );
}

export function renderGrid(
  canvas: HTMLCanvasElement,
  env: EnvView,
  trajectory: TrajectoryView | null,
  frame: number,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const cw = canvas.width / env.width;
  const ch = canvas.height / env.height;
  ctx.strokeStyle = "#ccc";
  for (let r = 0; r <= env.height; r++) {
    ctx.beginPath();
    ctx.moveTo(0, r * ch);
    ctx.lineTo(canvas.width, r * ch);
    ctx.stroke();
  }
  for (let c = 0; c <= env.width; c++) {
    ctx.beginPath();
    ctx.moveTo(c * cw, 0);
    ctx.lineTo(c * cw, canvas.height);
    ctx.stroke();
  }
  if (!trajectory) return;
  const upto = Math.min(frame, trajectory.cells.length - 1);
  ctx.strokeStyle = "#adb5bd";
  ctx.lineWidth = 2;
  ctx.beginPath();
  for (let i = 0; i <= upto; i++) {
    const [row, col] = trajectory.cells[i];
    const x = (col + 0.5) * cw;
    const y = (row + 0.5) * ch;
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  }
  ctx.stroke();
  ctx.lineWidth = 1;
  const [row, col] = trajectory.cells[upto];
  ctx.fillStyle = "#1864ab";
  ctx.beginPath();
  ctx.arc((col + 0.5) * cw, (row + 0.5) * ch, Math.min(cw, ch) * 0.3, 0, 2 * Math.PI);
  ctx.fill();
}

export function renderReturnBars(
  el: HTMLElement,
  names: string[],
  display: DisplayState,
  front: FrontView,
): void {
  el.innerHTML = "";
  names.forEach((name, i) => {
    const value = display.numbers[`episode.return[${name}]`];
    if (value === undefined) return;
    // scale each bar against the spread of front returns for that objective
    const axis = front.policies.map((p) => p.return_vector[i]);
    const lo = Math.min(...axis, 0);
    const hi = Math.max(...axis, 0);
    const span = hi - lo || 1;
    const row = document.createElement("div");
    row.className = "bar-row";
    const label = document.createElement("span");
    label.className = "bar-label";
    label.textContent = name;
    const track = document.createElement("div");
    track.className = "bar-track";
    const bar = document.createElement("div");
    bar.className = "bar-fill";
    bar.style.background = OBJECTIVE_COLORS[i % OBJECTIVE_COLORS.length];
    bar.style.width = `${(Math.abs(value - Math.max(lo, Math.min(0, hi))) / span) * 100}%`;
    track.appendChild(bar);
    const amount = document.createElement("span");
    amount.className = "bar-value";
    amount.textContent = fmt(value);
    row.append(label, track, amount);
    el.appendChild(row);
  });
}

export function renderXiHistory(
  canvas: HTMLCanvasElement,
  history: number[][],
  names: string[],
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#eee";
  for (const frac of [0.25, 0.5, 0.75]) {
    ctx.beginPath();
    ctx.moveTo(0, canvas.height * frac);
    ctx.lineTo(canvas.width, canvas.height * frac);
    ctx.stroke();
  }
  if (history.length === 0) return;
  names.forEach((_, obj) => {
    ctx.strokeStyle = OBJECTIVE_COLORS[obj % OBJECTIVE_COLORS.length];
    ctx.lineWidth = 2;
    ctx.beginPath();
    history.forEach((xi, t) => {
      const x = (t / Math.max(1, history.length - 1)) * canvas.width;
      const y = canvas.height - xi[obj] * canvas.height;
      if (t === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
  });
  ctx.lineWidth = 1;
}

export function renderFrontScatter(
  canvas: HTMLCanvasElement,
  front: FrontView,
  currentPolicyId: number,
  lastRecord: InteractionRecord | null,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const xs = front.policies.map((p) => p.return_vector[0]);
  const ys = front.policies.map((p) => p.return_vector[1]);
  const pad = 18;
  const sx = (v: number) =>
    pad + ((v - Math.min(...xs)) / (Math.max(...xs) - Math.min(...xs) || 1)) * (canvas.width - 2 * pad);
  const sy = (v: number) =>
    canvas.height - pad - ((v - Math.min(...ys)) / (Math.max(...ys) - Math.min(...ys) || 1)) * (canvas.height - 2 * pad);
  if (lastRecord && lastRecord.policy_before !== lastRecord.policy_after) {
    const from = lastRecord.explanation.return_before;
    const to = lastRecord.explanation.return_after;
    ctx.strokeStyle = "#e8590c";
    ctx.beginPath();
    ctx.moveTo(sx(from[0]), sy(from[1]));
    ctx.lineTo(sx(to[0]), sy(to[1]));
    ctx.stroke();
  }
  for (const policy of front.policies) {
    const [a, b] = policy.return_vector;
    ctx.fillStyle = policy.policy_id === currentPolicyId ? "#e8590c" : "#1864ab";
    ctx.beginPath();
    ctx.arc(sx(a), sy(b), policy.policy_id === currentPolicyId ? 7 : 4, 0, 2 * Math.PI);
    ctx.fill();
    ctx.fillStyle = "#666";
    ctx.font = "11px sans-serif";
    ctx.fillText(`${fmt(policy.policy_id)}: (${fmt(a)}, ${fmt(b)})`, sx(a) + 8, sy(b) - 6);
  }
}

export function renderAuditTable(el: HTMLElement, records: InteractionRecord[]): void {
  el.innerHTML = "";
  if (records.length === 0) {
    el.textContent = "no interactions yet";
    return;
  }
  const table = document.createElement("table");
  const head = table.insertRow();
  for (const col of ["#", "ζ", "ζ̂", "policy", "Ξ after", "reviewed", ""]) {
    const th = document.createElement("th");
    th.textContent = col;
    head.appendChild(th);
  }
  for (const record of records) {
    const row = table.insertRow();
    row.insertCell().textContent = fmt(record.index);
    row.insertCell().textContent = fmt(record.zeta);
    row.insertCell().textContent = record.zeta_hat === null ? "–" : fmt(record.zeta_hat);
    row.insertCell().textContent = `${fmt(record.policy_before)} → ${fmt(record.policy_after)}`;
    row.insertCell().textContent = record.xi_after.map(fmt).join(", ");
    row.insertCell().textContent = record.reviewed ? "yes" : "no";
    const cell = row.insertCell();
    const details = document.createElement("details");
    const summary = document.createElement("summary");
    summary.textContent = "explanation";
    const pre = document.createElement("pre");
    pre.textContent = JSON.stringify(record.explanation, null, 2);
    details.append(summary, pre);
    cell.appendChild(details);
  }
  el.appendChild(table);
}

export function auditToJsonLines(records: InteractionRecord[]): string {
  return records.map((r) => JSON.stringify(r)).join("\n") + (records.length ? "\n" : "");
}
