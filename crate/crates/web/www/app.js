import init, { search, check, lattices } from "./pkg/resbin_web.js";

const LAWS = ["D1", "D2", "D3", "D4", "D5", "D6", "LD"];
const OPS = [["meet", "∧"], ["join", "∨"], ["mult", "·"], ["lres", "\\"], ["rres", "/"]];
const $ = (id) => document.getElementById(id);

function cayley(name, symbol, rows) {
  const t = document.createElement("table");
  t.className = "cayley";
  const head = t.insertRow();
  head.innerHTML = `<th>${symbol}</th>` + rows.map((_, j) => `<th>${j}</th>`).join("");
  rows.forEach((row, i) => {
    t.insertRow().innerHTML = `<th>${i}</th>` + row.map((v) => `<td>${v}</td>`).join("");
  });
  t.title = name;
  return t;
}

function fail(el, err) {
  el.className = "error";
  el.textContent = String(err.message ?? err);
}

function setupForm() {
  for (const law of LAWS) {
    const label = document.createElement("label");
    label.innerHTML = `<input type="checkbox" value="${law}"> ${law} `;
    $("assume").appendChild(label);
    if (law !== "LD") $("refute").insertAdjacentHTML("beforeend", `<option>${law}</option>`);
  }
  $("refute").value = "D1";
}

function runSearch(ev) {
  ev.preventDefault();
  const status = $("search-status");
  status.className = "";
  $("search-tables").replaceChildren();
  $("search-diagram").replaceChildren();
  const laws = [...$("assume").querySelectorAll("input:checked")].map((c) => c.value);
  const distributive = laws.includes("LD");
  const assume = laws.filter((l) => l !== "LD").join(",");
  try {
    const r = JSON.parse(search(Number($("size").value), assume, $("refute").value, distributive));
    status.textContent = `${r.task}: ${r.status} (${r.variables} variables, ${r.clauses} clauses, ${r.decisions} decisions)` +
      (r.reason ? ` - ${r.reason}` : "");
    if (r.model) {
      $("search-diagram").innerHTML = r.svg;
      for (const [op, sym] of OPS) $("search-tables").appendChild(cayley(op, sym, r.model.ops[op]));
      $("model-json").value = JSON.stringify(r.model);
    }
  } catch (err) {
    fail(status, err);
  }
}

function runCheck(ev) {
  ev.preventDefault();
  const out = $("check-result");
  out.className = "";
  try {
    const r = JSON.parse(check($("model-json").value, $("identity").value));
    const base = r.lattice && r.residuated ? "" : " (warning: not a residuated lattice-ordered binar)";
    if (r.holds) {
      out.textContent = `${r.identity} holds${base}`;
    } else {
      const asg = Object.entries(r.counterexample.assignment).map(([k, v]) => `${k}=${v}`).join(", ");
      out.textContent = `${r.identity} fails at ${asg}: ${r.counterexample.lhs} ≠ ${r.counterexample.rhs}${base}`;
    }
  } catch (err) {
    fail(out, err);
  }
}

function runLattices(ev) {
  ev.preventDefault();
  const gallery = $("lattice-gallery");
  gallery.replaceChildren();
  try {
    const r = JSON.parse(lattices(Number($("lattice-size").value)));
    $("lattice-count").className = "";
    $("lattice-count").textContent = `${r.count} lattice(s) of size ${r.size}`;
    r.lattices.forEach((l, i) => {
      const fig = document.createElement("figure");
      fig.innerHTML = `${l.svg}<figcaption>#${i + 1}${l.distributive ? "" : " (non-distributive)"}</figcaption>`;
      gallery.appendChild(fig);
    });
  } catch (err) {
    fail($("lattice-count"), err);
  }
}

await init();
setupForm();
$("search-form").addEventListener("submit", runSearch);
$("check-form").addEventListener("submit", runCheck);
$("lattice-form").addEventListener("submit", runLattices);
