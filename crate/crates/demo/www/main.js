import init, { sample_trace, bursts, similarity_curves, knn_regions } from "./pkg/hostprint_demo.js";

const $ = (id) => document.getElementById(id);
const COLORS = ["#1f77b4", "#d62728", "#2ca02c"];
const SHADES = ["#c6dbef", "#fcbba1", "#c7e9c0"];

function drawBursts() {
  const trace = sample_trace(7, Number($("b-index").value));
  const gap = Number($("b-gap").value);
  const min = Number($("b-min").value);
  $("b-gap-out").textContent = gap.toFixed(2);

  const canvas = $("b-canvas");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const n = trace.length / 3;
  if (n === 0) return;
  const end = trace[3 * (n - 1)] || 1;
  const maxBytes = Math.max(...trace.filter((_, i) => i % 3 === 1));
  const mid = canvas.height / 2;
  const x = (t) => 10 + (t / end) * (canvas.width - 20);

  const parts = [[[], []], [[], []]];
  for (let i = 0; i < n; i++) {
    const d = trace[3 * i + 2];
    parts[d][0].push(trace[3 * i]);
    parts[d][1].push(trace[3 * i + 1]);
  }
  const counts = [];
  for (const d of [0, 1]) {
    const peaks = bursts(Float64Array.from(parts[d][0]), Float64Array.from(parts[d][1]), gap, min);
    counts.push(peaks.length / 5);
    ctx.fillStyle = SHADES[d];
    for (let p = 0; p < peaks.length; p += 5) {
      const x0 = x(peaks[p]);
      const w = Math.max(2, x(peaks[p + 1]) - x0);
      ctx.fillRect(x0, d === 0 ? 5 : mid, w, mid - 5);
    }
    ctx.strokeStyle = COLORS[d];
    ctx.beginPath();
    parts[d][0].forEach((t, i) => {
      const h = (parts[d][1][i] / maxBytes) * (mid - 10);
      ctx.moveTo(x(t), mid);
      ctx.lineTo(x(t), d === 0 ? mid - h : mid + h);
    });
    ctx.stroke();
  }
  ctx.strokeStyle = "#999";
  ctx.beginPath();
  ctx.moveTo(0, mid);
  ctx.lineTo(canvas.width, mid);
  ctx.stroke();
  $("b-summary").textContent =
    `${n} packets over ${end.toFixed(2)} s; ${counts[0]} forward and ${counts[1]} backward bursts`;
}

function drawSimilarity() {
  const t = Number($("s-t").value);
  const g = Number($("s-g").value);
  $("s-t-out").textContent = t.toFixed(2);
  $("s-g-out").textContent = g.toFixed(2);
  const maxD = 5;
  const curve = similarity_curves(t, g, maxD, 400);

  const canvas = $("s-canvas");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const x = (d) => 30 + (d / maxD) * (canvas.width - 40);
  const y = (v) => canvas.height - 20 - v * (canvas.height - 40);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(x(0), y(1), x(maxD) - x(0), y(0) - y(1));
  ctx.fillStyle = "#666";
  ctx.fillText("0", x(0) - 3, canvas.height - 5);
  ctx.fillText(`d = ${maxD}`, x(maxD) - 30, canvas.height - 5);
  ctx.fillText("1", 15, y(1) + 4);
  [[1, COLORS[0], "SIM"], [2, COLORS[1], "MAP"]].forEach(([col, color, name], k) => {
    ctx.strokeStyle = color;
    ctx.beginPath();
    for (let i = 0; i < curve.length; i += 3) {
      const px = x(curve[i]);
      const py = y(curve[i + col]);
      i === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
    }
    ctx.stroke();
    ctx.fillStyle = color;
    ctx.fillText(name, x(maxD) - 40, y(1) + 16 + 14 * k);
  });
}

const knnPoints = [
  [0.2, 0.3, 0], [0.25, 0.7, 0], [0.3, 0.5, 0],
  [0.7, 0.25, 1], [0.75, 0.4, 1], [0.8, 0.2, 1],
  [0.6, 0.8, 2], [0.75, 0.75, 2],
];

function drawKnn() {
  const canvas = $("k-canvas");
  const ctx = canvas.getContext("2d");
  const res = 100;
  const k = Number($("k-k").value);
  $("k-k-out").textContent = k;
  const coords = Float64Array.from(knnPoints.flatMap((p) => [p[0], p[1]]));
  const labels = Uint32Array.from(knnPoints.map((p) => p[2]));
  const cells = knn_regions(coords, labels, k, $("k-w").value, $("k-m").value, res);
  const size = canvas.width / res;
  for (let i = 0; i < cells.length; i++) {
    ctx.fillStyle = SHADES[cells[i]] || "#fff";
    ctx.fillRect((i % res) * size, Math.floor(i / res) * size, size + 1, size + 1);
  }
  for (const [px, py, c] of knnPoints) {
    ctx.fillStyle = COLORS[c];
    ctx.beginPath();
    ctx.arc(px * canvas.width, (1 - py) * canvas.height, 5, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function onKnnClick(event) {
  const rect = event.target.getBoundingClientRect();
  const px = (event.clientX - rect.left) / rect.width;
  const py = 1 - (event.clientY - rect.top) / rect.height;
  if (event.shiftKey) {
    let best = -1;
    let bestD = Infinity;
    knnPoints.forEach(([x, y], i) => {
      const d = (x - px) ** 2 + (y - py) ** 2;
      if (d < bestD) [best, bestD] = [i, d];
    });
    if (best >= 0) knnPoints.splice(best, 1);
  } else {
    knnPoints.push([px, py, Number($("k-class").value)]);
  }
  drawKnn();
}

await init();
for (const id of ["b-index", "b-gap", "b-min"]) $(id).addEventListener("input", drawBursts);
for (const id of ["s-t", "s-g"]) $(id).addEventListener("input", drawSimilarity);
for (const id of ["k-k", "k-w", "k-m"]) $(id).addEventListener("input", drawKnn);
$("k-canvas").addEventListener("click", onKnnClick);
drawBursts();
drawSimilarity();
drawKnn();
