import init, { analyze_system, design_system, simulate_system, example_system } from "./pkg/funcctl_wasm.js";

const $ = (id) => document.getElementById(id);
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const DEFAULT_POLES = {
  example2: ["-3", "-6"], example3: ["-3,-5", "-6,-7"], remark8: ["-1,-2", "-3"],
};

function show(text) {
  $("raw").textContent = text;
  const v = JSON.parse(text);
  if (v.status === "error") {
    $("summary").innerHTML = `<p class="err">${v.kind}: ${escape(v.message)}</p>`;
    return null;
  }
  return v;
}

function escape(s) {
  return s.replace(/[&<>]/g, (c) => ({ "&": "&amp;", "<": "&lt;", ">": "&gt;" })[c]);
}

function fmt(x) {
  return Math.abs(x) < 1e-10 ? "0" : Number(x.toPrecision(6)).toString();
}

function spectrum(s) {
  return s.map(([re, im]) => (im === 0 ? fmt(re) : `${fmt(re)}${im < 0 ? "-" : "+"}${fmt(Math.abs(im))}i`)).join(", ");
}

function matrix(m) {
  return "[" + m.map((r) => r.map(fmt).join(", ")).join("; ") + "]";
}

function analyze() {
  const v = show(analyze_system($("system").value));
  if (!v) return;
  const rows = Object.entries(v.verdicts)
    .map(([k, ok]) => `<tr><td>${k.replaceAll("_", " ")}</td><td class="${ok ? "yes" : "no"}">${ok}</td></tr>`)
    .join("");
  $("summary").innerHTML = `<table>${rows}</table>`;
}

function design() {
  const v = show(design_system($("system").value, $("cpoles").value, $("opoles").value, $("augment").value));
  if (!v) return;
  const c = v.controller, o = v.observer, s = v.separation;
  $("summary").innerHTML = `<table>
    <tr><th>controller rows</th><td>${c.strategy}, R1 = ${matrix(c.r1)}</td></tr>
    <tr><th>Z</th><td>${matrix(c.z)}</td></tr>
    <tr><th>observer order</th><td>${o.n.length} (${o.strategy})</td></tr>
    <tr><th>N</th><td>${matrix(o.n)}</td></tr>
    <tr><th>Psi</th><td>${matrix(s.psi)}</td></tr>
    <tr><th>eig(Psi)</th><td>${spectrum(s.psi_spectrum)}</td></tr>
    <tr><th>full loop</th><td>${spectrum(s.full_spectrum)}</td></tr>
  </table>`;
}

function simulate() {
  const tf = parseFloat($("tfinal").value);
  const v = show(simulate_system($("system").value, $("cpoles").value, $("opoles").value, $("augment").value,
    $("x0").value, tf, 1e-3));
  if (!v) return;
  const series = [
    ...v.z.map((y, i) => ({ name: `z${i + 1}`, y, dash: [] })),
    ...v.zhat.map((y, i) => ({ name: `zhat${i + 1}`, y, dash: [6, 4] })),
    ...v.e.map((y, i) => ({ name: `e${i + 1}`, y, dash: [2, 3] })),
  ];
  plot(v.t, series);
  const last = (a) => fmt(a[a.length - 1]);
  $("summary").innerHTML = `<p>z(${fmt(v.t[v.t.length - 1])}) = ${v.z.map(last).join(", ")};
    e = ${v.e.map(last).join(", ")}</p>`;
}

function plot(t, series) {
  const cv = $("plot"), g = cv.getContext("2d");
  const W = cv.width, H = cv.height, L = 60, R = 120, T = 15, B = 30;
  g.clearRect(0, 0, W, H);
  let lo = Infinity, hi = -Infinity;
  for (const s of series) for (const y of s.y) { lo = Math.min(lo, y); hi = Math.max(hi, y); }
  if (!(hi > lo)) { hi = lo + 1; }
  const t0 = t[0], t1 = t[t.length - 1];
  const X = (x) => L + ((x - t0) / (t1 - t0)) * (W - L - R);
  const Y = (y) => T + ((hi - y) / (hi - lo)) * (H - T - B);
  g.strokeStyle = "#999"; g.fillStyle = "#333"; g.font = "12px sans-serif"; g.setLineDash([]);
  g.strokeRect(L, T, W - L - R, H - T - B);
  for (let k = 0; k <= 4; k++) {
    const y = lo + (k / 4) * (hi - lo), x = t0 + (k / 4) * (t1 - t0);
    g.fillText(fmt(y), 4, Y(y) + 4);
    g.fillText(fmt(x), X(x) - 8, H - 10);
  }
  if (lo < 0 && hi > 0) { g.beginPath(); g.moveTo(L, Y(0)); g.lineTo(W - R, Y(0)); g.stroke(); }
  series.forEach((s, i) => {
    g.strokeStyle = COLORS[i % COLORS.length]; g.setLineDash(s.dash); g.lineWidth = 1.5;
    g.beginPath();
    s.y.forEach((y, k) => (k ? g.lineTo(X(t[k]), Y(y)) : g.moveTo(X(t[k]), Y(y))));
    g.stroke();
    g.fillStyle = g.strokeStyle;
    g.fillText(s.name, W - R + 10, T + 16 * (i + 1));
  });
}

function loadExample() {
  const name = $("example").value;
  const text = example_system(name);
  $("system").value = text;
  const [c, o] = DEFAULT_POLES[name] ?? ["-1", "-2"];
  $("cpoles").value = c; $("opoles").value = o;
}

await init();
$("example").addEventListener("change", loadExample);
$("analyze").addEventListener("click", analyze);
$("design").addEventListener("click", design);
$("simulate").addEventListener("click", simulate);
loadExample();
analyze();
