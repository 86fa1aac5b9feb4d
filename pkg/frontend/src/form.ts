// Schema-driven incident form. Every control is generated from the
// /v1/schema response, so a redeployed service with different enums shows
// up here without any code change.

import type { SchemaField, ServiceSchema, IncidentFields } from "./api.js";

export interface IncidentForm {
  element: HTMLFormElement;
  fields: SchemaField[];
  /** Current values, omitting empty optional fields. */
  values(): IncidentFields;
  /** Names of required FS1 fields that are currently empty or unparsable. */
  invalidFields(): string[];
  /** True when at least one FS2 field carries a value. */
  hasRefinement(): boolean;
  setFieldError(name: string, message: string): void;
  clearFieldErrors(): void;
  refreshSubmitState(): void;
}

function controlFor(field: SchemaField, doc: Document): HTMLElement {
  if (field.type === "enum") {
    const select = doc.createElement("select");
    select.name = field.name;
    const blank = doc.createElement("option");
    blank.value = "";
    blank.textContent = field.required ? "select..." : "(not yet known)";
    select.appendChild(blank);
    for (const value of field.values ?? []) {
      const opt = doc.createElement("option");
      opt.value = String(value);
      opt.textContent = String(value);
      select.appendChild(opt);
    }
    return select;
  }
  if (field.type === "bool") {
    const select = doc.createElement("select");
    select.name = field.name;
    for (const [value, label] of [
      ["0", "no"],
      ["1", "yes"],
    ]) {
      const opt = doc.createElement("option");
      opt.value = value;
      opt.textContent = label;
      select.appendChild(opt);
    }
    return select;
  }
  if (field.type === "set") {
    const box = doc.createElement("div");
    box.className = "set-field";
    box.dataset.name = field.name;
    for (const value of field.values ?? []) {
      const label = doc.createElement("label");
      const cb = doc.createElement("input");
      cb.type = "checkbox";
      cb.name = field.name;
      cb.value = String(value);
      label.appendChild(cb);
      label.appendChild(doc.createTextNode(String(value)));
      box.appendChild(label);
    }
    return box;
  }
  const input = doc.createElement("input");
  input.name = field.name;
  if (field.type === "timestamp") {
    input.type = "datetime-local";
  } else if (field.type === "int" || field.type === "float") {
    input.type = "number";
    if (field.type === "float") input.step = "any";
  } else {
    input.type = "text";
  }
  return input;
}

function parseValue(field: SchemaField, raw: string): string | number | boolean | null {
  if (raw === "") return null;
  switch (field.type) {
    case "int": {
      const n = Number(raw);
      return Number.isInteger(n) ? n : null;
    }
    case "float": {
      const n = Number(raw);
      return Number.isFinite(n) ? n : null;
    }
    case "bool":
      return raw === "1";
    default:
      return raw;
  }
}

export function buildForm(schema: ServiceSchema, doc: Document): IncidentForm {
  const form = doc.createElement("form");
  form.id = "incident-form";
  form.noValidate = true;

  const groups: Record<"FS1" | "FS2", HTMLFieldSetElement> = {
    FS1: doc.createElement("fieldset"),
    FS2: doc.createElement("fieldset"),
  };
  groups.FS1.id = "fs1-fields";
  groups.FS2.id = "fs2-fields";
  const legend1 = doc.createElement("legend");
  legend1.textContent = "Initial report (required)";
  const legend2 = doc.createElement("legend");
  legend2.textContent = "Refinement (as details arrive)";
  groups.FS1.appendChild(legend1);
  groups.FS2.appendChild(legend2);

  for (const field of schema.fields) {
    const row = doc.createElement("div");
    row.className = "field-row";
    row.dataset.field = field.name;
    const label = doc.createElement("label");
    label.textContent = field.name + (field.required ? " *" : "");
    row.appendChild(label);
    row.appendChild(controlFor(field, doc));
    const err = doc.createElement("span");
    err.className = "field-error";
    err.hidden = true;
    row.appendChild(err);
    groups[field.feature_set].appendChild(row);
  }
  form.appendChild(groups.FS1);
  form.appendChild(groups.FS2);

  const submit = doc.createElement("button");
  submit.type = "submit";
  submit.id = "submit-incident";
  submit.textContent = "Predict duration";
  submit.disabled = true;
  form.appendChild(submit);

  const byName = new Map(schema.fields.map((f) => [f.name, f]));

  function rawValue(name: string): string {
    const field = byName.get(name)!;
    if (field.type === "set") {
      const checked = form.querySelectorAll<HTMLInputElement>(`input[name="${name}"]:checked`);
      return Array.from(checked)
        .map((c) => c.value)
        .join("|");
    }
    const control = form.querySelector<HTMLInputElement | HTMLSelectElement>(`[name="${name}"]`);
    return control ? control.value : "";
  }

  const api: IncidentForm = {
    element: form,
    fields: schema.fields,
    values() {
      const out: IncidentFields = {};
      for (const field of schema.fields) {
        if (field.type === "set") {
          const raw = rawValue(field.name);
          if (raw !== "") out[field.name] = raw.split("|");
          continue;
        }
        const parsed = parseValue(field, rawValue(field.name));
        if (parsed !== null) out[field.name] = parsed;
      }
      return out;
    },
    invalidFields() {
      const bad: string[] = [];
      for (const field of schema.fields) {
        if (!field.required || field.type === "set") continue;
        if (parseValue(field, rawValue(field.name)) === null) bad.push(field.name);
      }
      return bad;
    },
    hasRefinement() {
      return schema.fields
        .filter((f) => f.feature_set === "FS2")
        .some((f) => rawValue(f.name) !== "");
    },
    setFieldError(name, message) {
      const row = form.querySelector<HTMLElement>(`[data-field="${name}"]`);
      if (!row) return;
      const err = row.querySelector<HTMLElement>(".field-error")!;
      err.textContent = message;
      err.hidden = false;
    },
    clearFieldErrors() {
      for (const err of form.querySelectorAll<HTMLElement>(".field-error")) {
        err.hidden = true;
        err.textContent = "";
      }
    },
    refreshSubmitState() {
      submit.disabled = api.invalidFields().length > 0;
    },
  };

  form.addEventListener("input", () => api.refreshSubmitState());
  form.addEventListener("change", () => api.refreshSubmitState());
  return api;
}
