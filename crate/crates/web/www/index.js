import init, { renderHeatmap, renderDecomposition, solveDemo } from "./pkg/tpspline_web.js";

const $ = (id) => document.getElementById(id);
const params = () => ({
  kind: $("kind").value,
  seed: Number($("seed").value) >>> 0,
  resolution: Number($("resolution").value),
});

function show(svg, report = "") {
  $("plot").innerHTML = svg;
  $("report").textContent = report;
}

function guarded(action) {
  return () => {
    try {
      action();
    } catch (e) {
      show("", `error: ${e}`);
    }
  };
}

await init();

$("heatmap").addEventListener("click", guarded(() => {
  const p = params();
  show(renderHeatmap(p.kind, p.seed, p.resolution));
}));

$("decompose").addEventListener("click", guarded(() => {
  const p = params();
  show(renderDecomposition(p.kind, p.seed, p.resolution));
}));

$("solve").addEventListener("click", guarded(() => {
  const p = params();
  const r = solveDemo(p.kind, Number($("m").value), p.seed, p.resolution);
  show(r.svg, r.report);
  r.free();
}));

$("heatmap").click();
