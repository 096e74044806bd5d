import init, { dimension, trajectory, convergence, duality } from "./pkg/evofam_web.js";

const $ = (id) => document.getElementById(id);

const PARAMS = {
  robin: { label: "Hölder exponent", value: 0.75, step: 0.05 },
  schrodinger: { label: "μ amplitude", value: 0.5, step: 0.05 },
  random: { label: "seed", value: 7, step: 1 },
};

function problem() {
  return [$("problem").value, Number($("size").value), Number($("param").value)];
}

function int(id) {
  return Number($(id).value) | 0;
}

function report(id, text, isError = false) {
  const el = $(id);
  el.textContent = text;
  el.classList.toggle("error", isError);
}

// Run `fn`, reporting thrown messages in the output element `id`.
function guarded(id, fn) {
  return () => {
    try {
      fn();
    } catch (e) {
      report(id, String(e), true);
    }
  };
}

// Minimal line plot: series = [{ xs, ys, color, label }].
function plot(canvas, series, { logX = false, logY = false } = {}) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = { l: 60, r: 12, t: 12, b: 28 };
  ctx.clearRect(0, 0, w, h);
  const tx = (v) => (logX ? Math.log10(v) : v);
  const ty = (v) => (logY ? Math.log10(Math.max(v, 1e-300)) : v);
  const xs = series.flatMap((s) => s.xs.map(tx));
  const ys = series.flatMap((s) => s.ys.map(ty)).filter(Number.isFinite);
  let [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (x1 === x0) x1 = x0 + 1;
  if (y1 === y0) { y0 -= 0.5; y1 += 0.5; }
  const px = (v) => pad.l + ((tx(v) - x0) / (x1 - x0)) * (w - pad.l - pad.r);
  const py = (v) => h - pad.b - ((ty(v) - y0) / (y1 - y0)) * (h - pad.t - pad.b);

  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad.l, pad.t, w - pad.l - pad.r, h - pad.t - pad.b);
  ctx.fillStyle = "#444";
  ctx.font = "12px system-ui";
  const fmt = (v, log) => (log ? `1e${v.toFixed(1)}` : v.toPrecision(3));
  ctx.fillText(fmt(y1, logY), 4, pad.t + 10);
  ctx.fillText(fmt(y0, logY), 4, h - pad.b);
  ctx.fillText(fmt(x0, logX), pad.l, h - 8);
  ctx.fillText(fmt(x1, logX), w - pad.r - 50, h - 8);

  series.forEach((s, k) => {
    ctx.strokeStyle = s.color;
    ctx.fillStyle = s.color;
    ctx.beginPath();
    s.xs.forEach((x, i) => (i ? ctx.lineTo(px(x), py(s.ys[i])) : ctx.moveTo(px(x), py(s.ys[i]))));
    ctx.stroke();
    if (s.markers) s.xs.forEach((x, i) => ctx.fillRect(px(x) - 2, py(s.ys[i]) - 2, 4, 4));
    ctx.fillText(s.label, w - pad.r - 160, pad.t + 16 + 16 * k);
  });
}

function updateDimension() {
  try {
    $("dim").textContent = `dimension ${dimension(...problem())}`;
    $("dim").classList.remove("error");
  } catch (e) {
    $("dim").textContent = String(e);
    $("dim").classList.add("error");
  }
}

function runTrajectory() {
  const samples = int("traj-samples");
  const started = performance.now();
  const out = trajectory(...problem(), int("traj-cells"), samples);
  const rows = samples + 1;
  const t = [], hn = [], vn = [];
  for (let i = 0; i < rows; i++) {
    t.push(out[3 * i]);
    hn.push(out[3 * i + 1]);
    vn.push(out[3 * i + 2]);
  }
  const profile = Array.from(out.slice(3 * rows));
  plot($("traj-norms"), [
    { xs: t, ys: hn, color: "#1f77b4", label: "‖u(t)‖_H" },
    { xs: t, ys: vn, color: "#d62728", label: "‖u(t)‖_V" },
  ]);
  plot($("traj-profile"), [
    { xs: profile.map((_, i) => i), ys: profile, color: "#2ca02c", label: "u(T) coefficients", markers: true },
  ]);
  const ms = (performance.now() - started).toFixed(0);
  report("traj-out", `‖u(T)‖_H = ${hn[rows - 1].toExponential(4)}   ‖u(T)‖_V = ${vn[rows - 1].toExponential(4)}   (${ms} ms)`);
}

function runConvergence() {
  const started = performance.now();
  const out = convergence(...problem(), int("conv-level"));
  const cells = [], errors = [];
  for (let i = 0; i < out.length; i += 2) {
    cells.push(out[i]);
    errors.push(out[i + 1]);
  }
  plot($("conv-plot"), [{ xs: cells, ys: errors, color: "#9467bd", label: "error in L(H)", markers: true }], {
    logX: true,
    logY: true,
  });
  const n = cells.length;
  const order = n > 1 ? Math.log(errors[n - 2] / errors[n - 1]) / Math.log(cells[n - 1] / cells[n - 2]) : NaN;
  const lines = cells.map((c, i) => `${String(c).padStart(6)}  ${errors[i].toExponential(3)}`);
  lines.push(`last observed order ${order.toFixed(2)}   (${(performance.now() - started).toFixed(0)} ms)`);
  report("conv-out", lines.join("\n"));
}

function runDuality() {
  const [right, wrong] = duality(...problem(), int("dual-cells"), Number($("dual-ratio").value), int("dual-pairs"));
  report(
    "dual-out",
    `reflected subdivision: max defect ${right.toExponential(3)}\n` +
      `original subdivision:  max defect ${wrong.toExponential(3)}`,
  );
}

await init();

$("problem").addEventListener("change", () => {
  const p = PARAMS[$("problem").value];
  $("param-label").textContent = p.label;
  $("param").value = p.value;
  $("param").step = p.step;
  updateDimension();
});
$("size").addEventListener("change", updateDimension);
$("param").addEventListener("change", updateDimension);
$("traj-run").addEventListener("click", guarded("traj-out", runTrajectory));
$("conv-run").addEventListener("click", guarded("conv-out", runConvergence));
$("dual-run").addEventListener("click", guarded("dual-out", runDuality));
updateDimension();
