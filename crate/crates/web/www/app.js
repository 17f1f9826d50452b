import init, { bridge_paths, cusum_demo, limit_histogram } from "./pkg/breaklab_web.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

function setup(canvas) {
  const dpr = window.devicePixelRatio || 1;
  canvas.width = canvas.clientWidth * dpr;
  canvas.height = canvas.clientHeight * dpr;
  const ctx = canvas.getContext("2d");
  ctx.scale(dpr, dpr);
  ctx.clearRect(0, 0, canvas.clientWidth, canvas.clientHeight);
  ctx.font = "11px system-ui";
  return { ctx, w: canvas.clientWidth, h: canvas.clientHeight };
}

// series: [{xs, ys, color, dash}], hlines: [{y, color, label}]
function plot(canvas, series, { hlines = [], vlines = [], title = "" } = {}) {
  const { ctx, w, h } = setup(canvas);
  const pad = 30;
  let xmin = Infinity, xmax = -Infinity, ymin = Infinity, ymax = -Infinity;
  for (const s of series) {
    for (const x of s.xs) { xmin = Math.min(xmin, x); xmax = Math.max(xmax, x); }
    for (const y of s.ys) if (Number.isFinite(y)) { ymin = Math.min(ymin, y); ymax = Math.max(ymax, y); }
  }
  for (const l of hlines) { ymin = Math.min(ymin, l.y); ymax = Math.max(ymax, l.y); }
  if (ymin === ymax) { ymin -= 1; ymax += 1; }
  const sx = x => pad + (x - xmin) / (xmax - xmin || 1) * (w - 2 * pad);
  const sy = y => h - pad + (ymin - y) / (ymax - ymin) * (h - 2 * pad);

  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#555";
  ctx.fillText(ymax.toPrecision(3), 2, pad + 4);
  ctx.fillText(ymin.toPrecision(3), 2, h - pad);
  ctx.fillText(title, pad + 4, pad - 8);

  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.setLineDash(s.dash || []);
    ctx.beginPath();
    let open = false;
    s.xs.forEach((x, i) => {
      const y = s.ys[i];
      if (!Number.isFinite(y)) { open = false; return; }
      open ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y));
      open = true;
    });
    ctx.stroke();
  }
  ctx.setLineDash([4, 3]);
  for (const l of hlines) {
    ctx.strokeStyle = l.color;
    ctx.beginPath(); ctx.moveTo(pad, sy(l.y)); ctx.lineTo(w - pad, sy(l.y)); ctx.stroke();
    if (l.label) { ctx.fillStyle = l.color; ctx.fillText(l.label, w - pad - 80, sy(l.y) - 3); }
  }
  for (const l of vlines) {
    ctx.strokeStyle = l.color;
    ctx.beginPath(); ctx.moveTo(sx(l.x), pad); ctx.lineTo(sx(l.x), h - pad); ctx.stroke();
  }
  ctx.setLineDash([]);
}

function values(form) {
  const out = {};
  for (const el of form.elements) if (el.name) out[el.name] = el.type === "number" ? Number(el.value) : el.value;
  return out;
}

function guard(outEl, f) {
  try {
    outEl.classList.remove("err");
    f();
  } catch (e) {
    outEl.classList.add("err");
    outEl.textContent = String(e.message || e);
  }
}

const range = (n, start = 0) => Array.from({ length: n }, (_, i) => i + start);

function runScan() {
  const v = values(document.getElementById("scan"));
  const out = document.getElementById("scan-out");
  guard(out, () => {
    const r = JSON.parse(cusum_demo(v.family, v.t, v.s, v.shift, v.c, v.corr, v.seed));
    const ts = range(r.y.length, 1);
    const series = [{ xs: ts, ys: r.y, color: COLORS[0] }];
    if (r.regressor) series.push({ xs: ts, ys: r.regressor, color: COLORS[2] });
    const vlines = r.break_index > 0 && r.break_index < r.y.length ? [{ x: r.break_index, color: "#999" }] : [];
    plot(document.getElementById("scan-data"), series, {
      vlines, title: r.regressor ? "y (blue), lagged regressor (green)" : "y",
    });

    const cusum = r.cusum, wald = r.wald;
    const scale = Math.max(...wald.path.filter(Number.isFinite)) || 1;
    plot(document.getElementById("scan-path"), [
      { xs: range(cusum.path.length, cusum.k_min), ys: cusum.path.map(Math.abs), color: COLORS[0] },
      { xs: range(wald.path.length, wald.k_min), ys: wald.path.map(x => x / scale * cusum.cv * 1.5), color: COLORS[1], dash: [2, 2] },
    ], {
      hlines: [{ y: cusum.cv, color: COLORS[0], label: "CUSUM 5% cv" }],
      vlines,
      title: "|CUSUM| path (blue) and rescaled Wald path (red) over k",
    });
    const line = (name, s) =>
      `${name.padEnd(6)} sup ${s.sup.toFixed(3).padStart(8)} at k = ${String(s.k_hat).padStart(4)}   5% cv ${s.cv.toFixed(3)}   ${s.reject ? "reject" : "no rejection"}`;
    out.textContent = `true break index ${r.break_index}\n${line("CUSUM", cusum)}\n${line("Wald", wald)}`;
  });
}

function runBridges() {
  const v = values(document.getElementById("bridges"));
  const out = document.getElementById("bridge-out");
  guard(out, () => {
    const r = JSON.parse(bridge_paths(v.n, v.steps, v.seed));
    const xs = range(r.n_steps + 1).map(i => i / r.n_steps);
    plot(document.getElementById("bridge-plot"),
      r.paths.map((ys, i) => ({ xs, ys, color: COLORS[i % COLORS.length] })),
      { hlines: [{ y: 1.358, color: "#555", label: "1.358" }, { y: -1.358, color: "#555" }], title: "BB(r) = W(r) - r W(1)" });
    const over = r.sups.filter(s => s > 1.358).length;
    out.textContent = `${over} of ${r.sups.length} paths leave the band |BB| <= 1.358 (about 5% expected)`;
  });
}

function runLimit() {
  const v = values(document.getElementById("limit"));
  const out = document.getElementById("limit-out");
  guard(out, () => {
    const r = JSON.parse(limit_histogram(v.c, v.corr, v.reps, v.steps, v.seed));
    const mids = r.edges.slice(1).map((e, i) => (e + r.edges[i]) / 2);
    const n = r.bridge.reduce((a, b) => a + b, 0);
    const dens = h => h.map(x => x / n);
    plot(document.getElementById("limit-plot"), [
      { xs: mids, ys: dens(r.bridge), color: COLORS[0] },
      { xs: mids, ys: dens(r.lur), color: COLORS[1] },
    ], { vlines: [{ x: r.bridge_q95, color: COLORS[0] }], title: "sup|BB| (blue) vs local-to-unity CUSUM limit (red)" });
    out.textContent =
      `95% quantile: bridge ${r.bridge_q95.toFixed(3)}, local-to-unity ${r.lur_q95.toFixed(3)}\n` +
      `rejection rate of a nominal 5% bridge test under this limit: ${(100 * r.lur_exceed).toFixed(1)}%`;
  });
}

await init();
for (const [id, f] of [["scan", runScan], ["bridges", runBridges], ["limit", runLimit]]) {
  document.getElementById(id).addEventListener("submit", e => { e.preventDefault(); f(); });
  f();
}
