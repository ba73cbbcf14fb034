import init, { compare_with_oracle, simulate_netlist, stability_band } from "./pkg/memsolve_web.js";

const PRESETS = {
  volterra: `family=volterra
a=2
b=0.001
k1="exp(-t)"
k2="exp(s)*s/(1+s)"
N0=1`,
  turbulent: `family=turbulent
p="1/8*exp(-2*t)"
k1="1/2*exp(-t)"
k2="exp(-s)"
u0=1`,
  cosh: `family=linear_first_order
k="1"
u0=1`,
  linear2: `family=linear
order=2
a.1.1.0=-1
a.1.1.1=1
a.1.1.2=1
ic.1.0=1`,
};

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function status(id, text, error = false) {
  const el = $(id);
  el.textContent = text;
  el.classList.toggle("error", error);
}

// series: [{ x, y, color, width?, dash? }]
function plot(canvas, series) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = { l: 56, r: 12, t: 12, b: 28 };
  ctx.clearRect(0, 0, w, h);

  let [x0, x1, y0, y1] = [Infinity, -Infinity, Infinity, -Infinity];
  for (const s of series) {
    for (let i = 0; i < s.x.length; i++) {
      if (!Number.isFinite(s.y[i])) continue;
      x0 = Math.min(x0, s.x[i]); x1 = Math.max(x1, s.x[i]);
      y0 = Math.min(y0, s.y[i]); y1 = Math.max(y1, s.y[i]);
    }
  }
  if (!Number.isFinite(x0)) return;
  if (y1 === y0) { y0 -= 1; y1 += 1; }
  const sx = (x) => pad.l + ((x - x0) / (x1 - x0 || 1)) * (w - pad.l - pad.r);
  const sy = (y) => h - pad.b - ((y - y0) / (y1 - y0)) * (h - pad.t - pad.b);

  ctx.strokeStyle = "#999";
  ctx.lineWidth = 1;
  ctx.strokeRect(pad.l, pad.t, w - pad.l - pad.r, h - pad.t - pad.b);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.textAlign = "right";
  for (const y of [y0, (y0 + y1) / 2, y1]) ctx.fillText(y.toPrecision(3), pad.l - 4, sy(y) + 4);
  ctx.textAlign = "center";
  for (const x of [x0, (x0 + x1) / 2, x1]) ctx.fillText(x.toPrecision(3), sx(x), h - 10);

  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = s.width ?? 1.5;
    ctx.setLineDash(s.dash ?? []);
    ctx.beginPath();
    let pen = false;
    for (let i = 0; i < s.x.length; i++) {
      if (!Number.isFinite(s.y[i])) { pen = false; continue; }
      const [px, py] = [sx(s.x[i]), sy(s.y[i])];
      if (pen) ctx.lineTo(px, py); else ctx.moveTo(px, py);
      pen = true;
    }
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

function compare() {
  try {
    const c = compare_with_oracle($("spec").value, num("cmp-dt"), num("cmp-tend"));
    const t = c.t();
    plot($("cmp-plot"), [
      { x: t, y: c.oracle(), color: "#222", width: 3 },
      { x: t, y: c.circuit(), color: "#d62", dash: [6, 4] },
    ]);
    status("cmp-status", `circuit (dashed) vs direct solution: max relative deviation ${c.max_deviation.toExponential(3)}`);
    $("netlist").textContent = c.netlist;
    c.free();
  } catch (e) {
    status("cmp-status", String(e.message ?? e), true);
  }
}

function simulate() {
  try {
    const r = simulate_netlist($("netlist").textContent, num("sim-dt"), num("sim-tend"));
    plot($("sim-plot"), [{ x: r.t(), y: r.y(), color: "#26a" }]);
    let msg = `negative-memductance steps: ${r.passivity_steps}`;
    if (r.truncated_at !== undefined) msg += `; left the representable range at t = ${r.truncated_at.toFixed(3)}`;
    status("sim-status", msg);
    r.free();
  } catch (e) {
    status("sim-status", String(e.message ?? e), true);
  }
}

function stability() {
  try {
    const b = stability_band($("netlist").textContent, num("tol"), num("iters"), num("seed"), 1e-2, num("stab-tend"));
    const t = b.t();
    plot($("stab-plot"), [
      { x: t, y: b.p90(), color: "#9bd" },
      { x: t, y: b.p10(), color: "#9bd" },
      { x: t, y: b.mean(), color: "#126", width: 2 },
    ]);
    const mean = b.mean();
    status("stab-status", `terminal mean relative error ${mean[mean.length - 1].toFixed(4)} (band: 10th-90th percentile); lost iterations: ${b.lost}`);
    b.free();
  } catch (e) {
    status("stab-status", String(e.message ?? e), true);
  }
}

await init();
$("netlist").contentEditable = "true";
$("preset").addEventListener("change", (e) => { $("spec").value = PRESETS[e.target.value]; compare(); });
$("compare").addEventListener("click", compare);
$("simulate").addEventListener("click", simulate);
$("stability").addEventListener("click", stability);
compare();
