/** Browser console: instance browser, what-if editor, plan diff, and volume
 * sweep views. All displayed numbers come from service responses; this file
 * only arranges them. Solves show an explicit pending state (no optimistic
 * updates), and at most one what-if is in flight per view.
 */

import { ApiClient, ApiError } from "./api.js";
import {
  costSeries,
  referenceCountSeries,
  stepPath,
  trailerCountSeries,
} from "./chart.js";
import {
  compareChips,
  diffAgainstBase,
  planDiffRows,
  renderDiffCells,
  solutionChips,
} from "./diff.js";
import { decodeState, encodeState, type ConsoleState } from "./state.js";
import { runSweep } from "./sweep.js";
import type { InstanceDoc, SolutionDoc, WhatIfResponse } from "./types.js";

const client = new ApiClient("");

interface AppContext {
  state: ConsoleState;
  instance: InstanceDoc | null;
  baseSolve: WhatIfResponse | null;
  current: WhatIfResponse | null;
  sweep: WhatIfResponse[];
  busy: boolean;
}

const ctx: AppContext = {
  state: decodeState(window.location.hash),
  instance: null,
  baseSolve: null,
  current: null,
  sweep: [],
  busy: false,
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    if (k === "class") node.className = v;
    else node.setAttribute(k, v);
  }
  node.append(...children);
  return node;
}

function pushState() {
  window.location.hash = encodeState(ctx.state);
}

function showError(err: unknown) {
  const box = document.getElementById("errors")!;
  const message =
    err instanceof ApiError ? `${err.message}` : `unexpected error: ${String(err)}`;
  box.replaceChildren(el("div", { class: "error" }, message));
}

function clearError() {
  document.getElementById("errors")!.replaceChildren();
}

function setBusy(busy: boolean, label = "solving…") {
  ctx.busy = busy;
  const spin = document.getElementById("pending")!;
  spin.textContent = busy ? label : "";
  document
    .querySelectorAll("button")
    .forEach((b) => ((b as HTMLButtonElement).disabled = busy));
}

// ---------------------------------------------------------------------------
// Views

function navBar(): HTMLElement {
  const mk = (view: ConsoleState["view"], label: string) => {
    const b = el("button", { class: ctx.state.view === view ? "tab active" : "tab" }, label);
    b.onclick = () => {
      ctx.state.view = view;
      pushState();
      render();
    };
    return b;
  };
  return el(
    "nav",
    {},
    mk("instances", "Instance"),
    mk("whatif", "What-if"),
    mk("sweep", "Sweep"),
  );
}

function instanceView(): HTMLElement {
  const root = el("section", { class: "view" });
  const form = el("div", { class: "upload" });
  const area = el("textarea", {
    rows: "10",
    cols: "80",
    placeholder: "paste an instance JSON document…",
  });
  const upload = el("button", {}, "Upload instance");
  upload.onclick = async () => {
    clearError();
    setBusy(true, "uploading…");
    try {
      const doc = JSON.parse(area.value) as InstanceDoc;
      const { id } = await client.uploadInstance(doc);
      ctx.state.instanceId = id;
      ctx.baseSolve = null;
      ctx.current = null;
      ctx.sweep = [];
      pushState();
      await loadInstance();
      render();
    } catch (err) {
      showError(err);
    } finally {
      setBusy(false);
    }
  };
  form.append(area, upload);
  root.append(el("h2", {}, "Instance"), form);

  if (ctx.state.instanceId && ctx.instance) {
    const inst = ctx.instance;
    root.append(
      el(
        "p",
        { class: "meta" },
        `id ${ctx.state.instanceId} — ${inst.sort_pairs.length} sort pairs, ` +
          `${inst.commodities.length} commodities, ${inst.trailer_types.length} trailer types`,
      ),
    );
    const table = el("table", { class: "commodities" });
    table.append(
      el(
        "tr",
        {},
        ...["commodity", "volume", "class", "primary", "alternates"].map((h) =>
          el("th", {}, h),
        ),
      ),
    );
    for (const c of inst.commodities) {
      table.append(
        el(
          "tr",
          {},
          el("td", {}, c.id),
          el("td", {}, String(c.volume)),
          el("td", {}, c.service_class),
          el("td", {}, c.primary),
          el("td", {}, c.alternates.join(", ")),
        ),
      );
    }
    root.append(table);
  }
  return root;
}

function chipsBox(solution: SolutionDoc): HTMLElement {
  const chips = solutionChips(solution);
  const box = el("div", { class: "chips" });
  const chip = (label: string, value: string) =>
    el("span", { class: "chip" }, `${label}: ${value}`);
  box.append(
    chip("cost", String(chips.cost)),
    chip("trailers", String(chips.trailerCount)),
  );
  if (chips.normalizedDistance !== null) {
    box.append(chip("Δ vs reference", chips.normalizedDistance.toFixed(4)));
  }
  if (chips.restorationCostDelta !== null) {
    box.append(chip("restoration cost", String(chips.restorationCostDelta)));
  }
  return box;
}

function diffTable(solution: SolutionDoc): HTMLElement {
  const rows = planDiffRows(solution);
  const cells = renderDiffCells(rows);
  const table = el("table", { class: "diff" });
  table.append(
    el(
      "tr",
      {},
      ...["sort pair", "trailer", "reference", "plan", "delta", "restoration"].map(
        (h) => el("th", {}, h),
      ),
    ),
  );
  cells.forEach((row, i) => {
    const tr = el("tr", { class: rows[i].delta === 0 ? "same" : "changed" });
    row.forEach((cell) => tr.append(el("td", {}, cell)));
    table.append(tr);
  });
  return table;
}

function whatIfView(): HTMLElement {
  const root = el("section", { class: "view" });
  root.append(el("h2", {}, "What-if"));
  if (!ctx.state.instanceId || !ctx.instance) {
    root.append(el("p", {}, "Upload or select an instance first."));
    return root;
  }
  const scaleLabel = el("span", { class: "scale-value" }, ctx.state.scale.toFixed(2));
  const slider = el("input", {
    type: "range",
    min: "0.8",
    max: "1.2",
    step: "0.01",
    value: String(ctx.state.scale),
  }) as HTMLInputElement;
  slider.oninput = () => {
    ctx.state.scale = Number(slider.value);
    scaleLabel.textContent = ctx.state.scale.toFixed(2);
    pushState();
  };
  const overridesBox = el("div", { class: "overrides" });
  for (const c of ctx.instance.commodities.slice(0, 12)) {
    const input = el("input", {
      type: "number",
      min: "0",
      step: "0.1",
      placeholder: String(c.volume),
      value:
        ctx.state.overrides[c.id] !== undefined ? String(ctx.state.overrides[c.id]) : "",
    }) as HTMLInputElement;
    input.onchange = () => {
      if (input.value === "") delete ctx.state.overrides[c.id];
      else ctx.state.overrides[c.id] = Number(input.value);
      pushState();
    };
    overridesBox.append(el("label", {}, `${c.id} `, input));
  }
  const solveButton = el("button", {}, "Solve what-if");
  solveButton.onclick = async () => {
    clearError();
    setBusy(true);
    try {
      if (!ctx.baseSolve) {
        ctx.baseSolve = await client.whatIf(ctx.state.instanceId!, {
          global_scale: 1.0,
          per_commodity_overrides: {},
        });
      }
      ctx.current = await client.whatIf(ctx.state.instanceId!, {
        global_scale: ctx.state.scale,
        per_commodity_overrides: ctx.state.overrides,
      });
      render();
    } catch (err) {
      showError(err);
    } finally {
      setBusy(false);
    }
  };
  root.append(
    el("div", { class: "controls" }, "global scale ", slider, scaleLabel, solveButton),
    el("details", {}, el("summary", {}, "per-commodity overrides"), overridesBox),
  );

  if (ctx.current) {
    root.append(el("h3", {}, "Recommended plan"), chipsBox(ctx.current.solution));
    root.append(diffTable(ctx.current.solution));
    if (ctx.baseSolve && ctx.baseSolve.solution_id !== ctx.current.solution_id) {
      const vsBase = el("div", { class: "vs-base" }, "loading comparison…");
      root.append(el("h3", {}, "Against the base solve"), vsBase);
      client
        .compare(ctx.current.solution_id, ctx.baseSolve.solution_id)
        .then((cmp) => {
          const chips = compareChips(cmp);
          vsBase.replaceChildren(
            el("span", { class: "chip" }, `Δ: ${chips.delta.toFixed(4)}`),
            el("span", { class: "chip" }, `step size: ${chips.tvStep.toFixed(3)}`),
            el("span", { class: "chip" }, `cost delta: ${chips.costDelta}`),
          );
        })
        .catch(showError);
      const rows = diffAgainstBase(ctx.current.solution, ctx.baseSolve.solution);
      const table = el("table", { class: "diff" });
      table.append(
        el(
          "tr",
          {},
          ...["sort pair", "trailer", "base", "current", "delta"].map((h) =>
            el("th", {}, h),
          ),
        ),
      );
      for (const row of rows) {
        table.append(
          el(
            "tr",
            { class: row.delta === 0 ? "same" : "changed" },
            el("td", {}, row.sortPair),
            el("td", {}, row.trailerType),
            el("td", {}, String(row.base)),
            el("td", {}, String(row.current)),
            el("td", {}, row.delta > 0 ? `+${row.delta}` : String(row.delta)),
          ),
        );
      }
      root.append(table);
    }
  }
  return root;
}

function sweepView(): HTMLElement {
  const root = el("section", { class: "view" });
  root.append(el("h2", {}, "Volume sweep"));
  if (!ctx.state.instanceId) {
    root.append(el("p", {}, "Upload or select an instance first."));
    return root;
  }
  const steps = el("input", { type: "number", min: "2", max: "50", value: "20" }) as HTMLInputElement;
  const progress = el("span", { class: "progress" });
  const run = el("button", {}, "Run sweep");
  run.onclick = async () => {
    clearError();
    setBusy(true, "sweeping…");
    try {
      ctx.sweep = await runSweep(
        client,
        ctx.state.instanceId!,
        Number(steps.value),
        (p) => (progress.textContent = `${p.done}/${p.total} (scale ${p.scale.toFixed(2)})`),
      );
      render();
    } catch (err) {
      showError(err);
    } finally {
      setBusy(false);
    }
  };
  root.append(el("div", { class: "controls" }, "steps ", steps, run, progress));

  if (ctx.sweep.length > 0) {
    const box = { width: 640, height: 240, padding: 30 };
    const cost = costSeries(ctx.sweep);
    const counts = trailerCountSeries(ctx.sweep);
    const reference = referenceCountSeries(ctx.sweep);
    const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
    svg.setAttribute("width", String(box.width));
    svg.setAttribute("height", String(box.height));
    svg.setAttribute("class", "sweep-chart");
    const mkPath = (d: string, cls: string) => {
      const p = document.createElementNS("http://www.w3.org/2000/svg", "path");
      p.setAttribute("d", d);
      p.setAttribute("class", cls);
      p.setAttribute("fill", "none");
      return p;
    };
    svg.append(mkPath(stepPath(reference, box), "series reference"));
    svg.append(mkPath(stepPath(counts, box), "series counts"));
    root.append(
      el("h3", {}, "Trailer count vs total volume (blue: proxy, grey: reference)"),
      svg,
      el(
        "table",
        { class: "sweep-data" },
        el(
          "tr",
          {},
          ...["total volume", "trailer count", "cost", "solution"].map((h) =>
            el("th", {}, h),
          ),
        ),
        ...ctx.sweep.map((r, i) =>
          el(
            "tr",
            {},
            el("td", {}, String(counts[i].totalVolume)),
            el("td", {}, String(counts[i].value)),
            el("td", {}, String(cost[i].value)),
            el("td", {}, r.solution_id),
          ),
        ),
      ),
    );
  }
  return root;
}

// ---------------------------------------------------------------------------

async function loadInstance() {
  if (ctx.state.instanceId) {
    ctx.instance = await client.getInstance(ctx.state.instanceId);
  }
}

function render() {
  const root = document.getElementById("app")!;
  root.replaceChildren(navBar());
  switch (ctx.state.view) {
    case "instances":
      root.append(instanceView());
      break;
    case "whatif":
      root.append(whatIfView());
      break;
    case "sweep":
      root.append(sweepView());
      break;
  }
}

window.addEventListener("hashchange", () => {
  ctx.state = decodeState(window.location.hash);
  loadInstance().then(render).catch(showError);
});

loadInstance()
  .then(render)
  .catch((err) => {
    render();
    showError(err);
  });
