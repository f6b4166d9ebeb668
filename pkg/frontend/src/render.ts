import { MetricsPoint, SessionView } from "./types.js";

export function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

const fmt = (x: number) => (Number.isFinite(x) ? x.toFixed(3) : "–");

export function renderSetup(fieldErrors: string[] = []): string {
  const errs = fieldErrors
    .map((e) => `<li class="field-error">${escapeHtml(e)}</li>`)
    .join("");
  return `
<section class="setup">
  <h2>Start a session</h2>
  <form id="setup-form">
    <label>Horizon (questions to ask)
      <input name="horizon" type="number" min="1" step="1" value="5" required>
    </label>
    <label>Performance table (CSV, optional — leave empty for the demo table)
      <input name="csv" type="file" accept=".csv,text/csv">
    </label>
    <button type="submit">Create session</button>
  </form>
  ${errs ? `<ul class="errors">${errs}</ul>` : ""}
</section>`;
}

export function renderQuestion(view: SessionView, disabled = false): string {
  const q = view.question;
  if (q === null) {
    return `<section class="question"><p>Waiting for the next question…</p></section>`;
  }
  const [a, b] = q.alternatives;
  if (!a || !b) throw new Error("question must carry two alternatives");
  const rows = view.criteria
    .map(
      (name, j) => `
    <tr>
      <th>${escapeHtml(name)}</th>
      <td>${fmt(a.performances[j] ?? NaN)}</td>
      <td>${fmt(b.performances[j] ?? NaN)}</td>
    </tr>`,
    )
    .join("");
  const dis = disabled ? " disabled" : "";
  return `
<section class="question">
  <h2>Which alternative do you prefer?</h2>
  <p class="round">Round ${view.round} of ${view.horizon}</p>
  <table class="comparison">
    <thead>
      <tr><th>Criterion</th><th>${escapeHtml(a.id)}</th><th>${escapeHtml(b.id)}</th></tr>
    </thead>
    <tbody>${rows}</tbody>
  </table>
  <div class="choices">
    <button class="choice" data-preferred="${a.index}" data-other="${b.index}"${dis}>
      Prefer ${escapeHtml(a.id)}
    </button>
    <button class="choice" data-preferred="${b.index}" data-other="${a.index}"${dis}>
      Prefer ${escapeHtml(b.id)}
    </button>
  </div>
  ${disabled ? `<p class="spinner">Updating the model…</p>` : ""}
</section>`;
}

function polyline(
  series: MetricsPoint[],
  pick: (m: MetricsPoint) => number,
  cls: string,
  width: number,
  height: number,
): string {
  const values = series.map(pick);
  const top = Math.max(...values, 1e-12);
  const pts = values
    .map((v, k) => {
      const x = series.length === 1 ? width / 2 : (k / (series.length - 1)) * width;
      const y = height - (v / top) * height;
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
  return `<polyline class="${cls}" fill="none" points="${pts}"/>`;
}

export function renderUncertaintyPanel(view: SessionView): string {
  const series = view.metrics;
  if (series.length === 0) {
    return `<section class="uncertainty"><p>No snapshots yet.</p></section>`;
  }
  const w = 360;
  const h = 120;
  const chart = `
  <svg class="metrics-chart" viewBox="0 0 ${w} ${h}" role="img"
       aria-label="uncertainty metrics per round" data-points="${series.length}">
    ${polyline(series, (m) => m.f_var, "f-var", w, h)}
    ${polyline(series, (m) => m.f_pwi, "f-pwi", w, h)}
    ${polyline(series, (m) => m.f_rai, "f-rai", w, h)}
  </svg>
  <p class="legend">f_VAR ${fmt(series.at(-1)!.f_var)} ·
     f_PWI ${fmt(series.at(-1)!.f_pwi)} ·
     f_RAI ${fmt(series.at(-1)!.f_rai)}</p>`;

  const names = view.alternative_ids;
  let heatmap = "";
  if (view.rai !== null) {
    const body = view.rai
      .map((row, i) => {
        const sum = row.reduce((s, v) => s + v, 0);
        const cells = row
          .map(
            (v) =>
              `<td class="rai-cell" style="background:rgba(30,90,190,${v.toFixed(3)})">${fmt(v)}</td>`,
          )
          .join("");
        return `<tr title="row sum ${sum.toFixed(3)}"><th>${escapeHtml(names[i] ?? String(i))}</th>${cells}</tr>`;
      })
      .join("");
    const ranks = names.map((_, r) => `<th>rank ${r + 1}</th>`).join("");
    heatmap = `
  <h3>Rank acceptability</h3>
  <table class="rai-heatmap"><thead><tr><th></th>${ranks}</tr></thead><tbody>${body}</tbody></table>`;
  }

  let pwiTable = "";
  if (view.pwi !== null) {
    const body = view.pwi
      .map((row, i) => {
        const cells = row
          .map((v, j) => `<td class="pwi-cell">${i === j ? "–" : fmt(v)}</td>`)
          .join("");
        return `<tr><th>${escapeHtml(names[i] ?? String(i))}</th>${cells}</tr>`;
      })
      .join("");
    const heads = names.map((n) => `<th>${escapeHtml(n)}</th>`).join("");
    pwiTable = `
  <h3>Pairwise winning indices</h3>
  <table class="pwi-matrix"><thead><tr><th></th>${heads}</tr></thead><tbody>${body}</tbody></table>`;
  }

  return `<section class="uncertainty"><h2>Uncertainty</h2>${chart}${heatmap}${pwiTable}</section>`;
}

export function renderDone(view: SessionView): string {
  const names = view.alternative_ids;
  const items = view.history
    .map(
      ([p, o]) =>
        `<li>${escapeHtml(names[p] ?? String(p))} preferred over ${escapeHtml(names[o] ?? String(o))}</li>`,
    )
    .join("");
  return `
<section class="done">
  <h2>Session complete</h2>
  <p>${view.history.length} comparisons collected.</p>
  <ol class="history">${items}</ol>
  <p><a id="export-link" href="#">Download transcript</a></p>
</section>`;
}

export function renderApp(
  view: SessionView | null,
  opts: { notice?: string | null; fieldErrors?: string[] } = {},
): string {
  const notice = opts.notice
    ? `<p class="notice">${escapeHtml(opts.notice)}</p>`
    : "";
  if (view === null) {
    return notice + renderSetup(opts.fieldErrors ?? []);
  }
  if (view.status === "done") {
    return notice + renderDone(view) + renderUncertaintyPanel(view);
  }
  const fitting = view.status !== "awaiting_answer";
  return notice + renderQuestion(view, fitting) + renderUncertaintyPanel(view);
}
