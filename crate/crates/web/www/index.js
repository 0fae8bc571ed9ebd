import init, { gustSamples, innovationsComparison, predictionCurves } from "./pkg/ddkf_web.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"];

const num = (id) => Number(document.getElementById(id).value);

// series: [{ label, x: [..], y: [..], dashed }]
function plot(canvasId, legendId, series) {
  const canvas = document.getElementById(canvasId);
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  const pad = 40;
  ctx.clearRect(0, 0, width, height);
  const xs = series.flatMap((s) => s.x);
  const ys = series.flatMap((s) => s.y);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y0 === y1) { y0 -= 1; y1 += 1; }
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (width - 2 * pad);
  const sy = (y) => height - pad - ((y - y0) / (y1 - y0)) * (height - 2 * pad);

  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, width - 2 * pad, height - 2 * pad);
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.fillText(y1.toPrecision(3), 2, pad + 4);
  ctx.fillText(y0.toPrecision(3), 2, height - pad);
  ctx.fillText(x0.toFixed(1), pad, height - pad + 14);
  ctx.fillText(x1.toFixed(1), width - pad - 20, height - pad + 14);

  const legend = document.getElementById(legendId);
  legend.innerHTML = "";
  series.forEach((s, i) => {
    const color = COLORS[i % COLORS.length];
    ctx.strokeStyle = color;
    ctx.setLineDash(s.dashed ? [5, 4] : []);
    ctx.beginPath();
    s.x.forEach((x, k) => (k ? ctx.lineTo(sx(x), sy(s.y[k])) : ctx.moveTo(sx(x), sy(s.y[k]))));
    ctx.stroke();
    const item = document.createElement("span");
    item.style.color = color;
    item.textContent = "━ " + s.label;
    legend.appendChild(item);
  });
  ctx.setLineDash([]);
}

function guarded(statusId, fn) {
  const status = document.getElementById(statusId);
  return () => {
    status.textContent = "computing…";
    // let the status repaint before the synchronous computation
    setTimeout(() => {
      const start = performance.now();
      try {
        const note = fn();
        status.textContent = `${note} (${((performance.now() - start) / 1000).toFixed(1)} s)`;
      } catch (e) {
        status.textContent = "error: " + (e.message ?? e);
      }
    }, 10);
  };
}

function runGusts() {
  const g = JSON.parse(gustSamples(num("airspeed"), num("seed"), 600));
  const t = g.horizontal.map((_, k) => k * g.dt);
  plot("gusts", "gusts-legend", [
    { label: "horizontal gust (ft/s)", x: t, y: g.horizontal },
    { label: "vertical gust (ft/s)", x: t, y: g.vertical },
  ]);
  return "600 samples";
}

function runInnovations() {
  const c = JSON.parse(innovationsComparison(num("airspeed"), num("seed"), num("n"), num("l")));
  const shown = 200;
  const t = c.truth[0].slice(0, shown).map((_, k) => k + c.first_sample);
  plot("innov", "innov-legend", [
    { label: "true e₁", x: t, y: c.truth[0].slice(0, shown) },
    { label: "estimated e₁", x: t, y: c.estimated[0].slice(0, shown), dashed: true },
  ]);
  return "correlation per channel: " + c.correlation.map((r) => r.toFixed(3)).join(", ");
}

function runPrediction() {
  const tf = num("tf");
  const p = JSON.parse(predictionCurves(num("airspeed"), num("seed"), num("n"), num("l"), tf));
  const past = 40;
  const tPast = Array.from({ length: past }, (_, k) => (p.now - past + 1 + k) * p.dt);
  const tFut = Array.from({ length: tf }, (_, k) => (p.now + 1 + k) * p.dt);
  const ch = 1;
  plot("pred", "pred-legend", [
    { label: "measured y₂", x: tPast, y: p.measured[ch].slice(-past) },
    { label: "noise-free y₂", x: tFut, y: p.truth[ch] },
    { label: "data-driven prediction", x: tFut, y: p.data_driven[ch], dashed: true },
    { label: "model-based prediction", x: tFut, y: p.model_based[ch], dashed: true },
  ]);
  const rmse = (a) => Math.sqrt(a.reduce((s, v, k) => s + (v - p.truth[ch][k]) ** 2, 0) / tf);
  return `RMSE data-driven ${rmse(p.data_driven[ch]).toFixed(3)}, model-based ${rmse(p.model_based[ch]).toFixed(3)}`;
}

await init();
document.getElementById("run-gusts").onclick = guarded("gusts-status", runGusts);
document.getElementById("run-innov").onclick = guarded("innov-status", runInnovations);
document.getElementById("run-pred").onclick = guarded("pred-status", runPrediction);
