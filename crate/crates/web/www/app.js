import init, { h0_curve, density_profiles, elliptic_spectrum } from "./pkg/mkgm_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

function plot(series, xlabel, ylabel) {
  const c = $("plot");
  const g = c.getContext("2d");
  const pad = 48;
  g.clearRect(0, 0, c.width, c.height);
  const xs = series.flatMap((s) => s.x);
  const ys = series.flatMap((s) => s.y);
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y1 === y0) { y0 -= 1; y1 += 1; }
  const px = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (c.width - 2 * pad);
  const py = (y) => c.height - pad - ((y - y0) / (y1 - y0)) * (c.height - 2 * pad);
  g.strokeStyle = "#999";
  g.strokeRect(pad, pad, c.width - 2 * pad, c.height - 2 * pad);
  g.fillStyle = "#333";
  g.fillText(xlabel, c.width / 2, c.height - 12);
  g.fillText(ylabel, 6, pad - 12);
  g.fillText(y1.toExponential(2), 4, pad + 4);
  g.fillText(y0.toExponential(2), 4, c.height - pad);
  g.fillText(x0.toFixed(2), pad, c.height - pad + 14);
  g.fillText(x1.toFixed(2), c.width - pad - 20, c.height - pad + 14);
  series.forEach((s, k) => {
    g.strokeStyle = s.color;
    g.beginPath();
    s.x.forEach((x, i) => (i ? g.lineTo(px(x), py(s.y[i])) : g.moveTo(px(x), py(s.y[i]))));
    g.stroke();
    g.fillStyle = s.color;
    g.fillText(s.label, c.width - pad - 120, pad + 14 + 14 * k);
  });
}

function guard(errId, f) {
  return () => {
    $(errId).textContent = "";
    try { f(); } catch (e) { $(errId).textContent = String(e); }
  };
}

function args() {
  return [num("eps"), Math.round(num("n")), num("tf"), num("va"), num("ba")];
}

async function main() {
  await init();
  $("curve").onclick = guard("run-err", () => {
    const [eps] = args();
    const v = h0_curve(...args());
    const t = [], h = [];
    for (let i = 0; i < v.length; i += 2) { t.push(v[i]); h.push(v[i + 1]); }
    plot([{ x: t, y: h, color: "#c33", label: "H0(t)" }], "t", "H0");
    $("run-out").textContent = `sup H0 = ${Math.max(...h).toExponential(4)}\nsup H0 / eps^2 = ${(Math.max(...h) / (eps * eps)).toFixed(4)}`;
  });
  $("dens").onclick = guard("run-err", () => {
    const v = density_profiles(...args());
    const n = v.length / 3;
    const x = Array.from(v.slice(0, n));
    plot(
      [
        { x, y: Array.from(v.slice(n, 2 * n)), color: "#36c", label: "|Phi|^2" },
        { x, y: Array.from(v.slice(2 * n)), color: "#c33", label: "rho" },
      ],
      "x",
      "density",
    );
    $("run-out").textContent = "";
  });
  $("spec").onclick = guard("spec-out", () => {
    const v = elliptic_spectrum(num("ux"), num("uy"), num("uz"));
    $("spec-out").textContent =
      `eigenvalues: ${v[0].toFixed(12)}, ${v[1].toFixed(12)}, ${v[2].toFixed(12)}\n1/(U0)^2:    ${v[3].toFixed(12)}`;
  });
}

main();
