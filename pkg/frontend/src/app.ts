// Operator console wiring: schema-driven form, two-phase prediction flow,
// stale-response discarding, and the service-down banner.

import { ApiClient, ServiceError } from "./api.js";
import type { PredictionResponse } from "./api.js";
import { buildForm, IncidentForm } from "./form.js";
import { renderPrediction } from "./view.js";

export interface ConsoleOptions {
  baseUrl: string;
}

export interface ConsoleHandle {
  form: IncidentForm | null;
  /** Resolves once the schema has loaded and the form is on the page. */
  ready: Promise<void>;
  retry(): Promise<void>;
}

export function initConsole(root: HTMLElement, options: ConsoleOptions): ConsoleHandle {
  const doc = root.ownerDocument;
  const client = new ApiClient(options.baseUrl);
  root.innerHTML = "";

  const banner = doc.createElement("div");
  banner.id = "banner";
  banner.hidden = true;
  const bannerText = doc.createElement("span");
  const retryButton = doc.createElement("button");
  retryButton.id = "retry";
  retryButton.textContent = "Retry";
  banner.appendChild(bannerText);
  banner.appendChild(retryButton);
  root.appendChild(banner);

  const formHost = doc.createElement("div");
  formHost.id = "form-host";
  root.appendChild(formHost);

  const phases = doc.createElement("div");
  phases.id = "phases";
  const initial = doc.createElement("section");
  initial.id = "phase-initial";
  initial.hidden = true;
  const refined = doc.createElement("section");
  refined.id = "phase-refined";
  refined.hidden = true;
  phases.appendChild(initial);
  phases.appendChild(refined);
  root.appendChild(phases);

  const status = doc.createElement("div");
  status.id = "status";
  root.appendChild(status);

  let requestCounter = 0;
  let currentRequest: string | null = null;
  let initialShown = false;

  const handle: ConsoleHandle = {
    form: null,
    ready: Promise.resolve(),
    retry: () => load(),
  };

  async function submit(): Promise<void> {
    const form = handle.form;
    if (!form || currentRequest !== null) return; // one in-flight request per form
    form.clearFieldErrors();
    const requestId = `req-${++requestCounter}`;
    currentRequest = requestId;
    status.textContent = "predicting...";
    try {
      const prediction = await client.predict(form.values(), requestId);
      if (prediction.request_id !== requestId || currentRequest !== requestId) {
        return; // stale response: a newer submission owns the screen
      }
      showPrediction(prediction);
      status.textContent = "";
    } catch (err) {
      if (currentRequest !== requestId) return;
      if (err instanceof ServiceError && err.status === 400) {
        for (const [name, message] of Object.entries(err.fields)) {
          form.setFieldError(name, message);
        }
        status.textContent = err.message;
      } else {
        status.textContent = `service error: ${err instanceof Error ? err.message : String(err)}`;
      }
    } finally {
      if (currentRequest === requestId) currentRequest = null;
    }
  }

  function showPrediction(prediction: PredictionResponse): void {
    const refinement = handle.form?.hasRefinement() ?? false;
    if (!initialShown) {
      renderPrediction(doc, initial, "initial", prediction);
      initialShown = true;
      return;
    }
    if (refinement) {
      renderPrediction(doc, refined, "refined", prediction);
    } else {
      // re-submitting basics replaces the initial card
      renderPrediction(doc, initial, "initial", prediction);
      refined.hidden = true;
      refined.innerHTML = "";
    }
  }

  async function load(): Promise<void> {
    banner.hidden = true;
    formHost.innerHTML = "";
    handle.form = null;
    try {
      const schema = await client.schema();
      const form = buildForm(schema, doc);
      form.element.addEventListener("submit", (event) => {
        event.preventDefault();
        void submit();
      });
      formHost.appendChild(form.element);
      handle.form = form;
      form.refreshSubmitState();
    } catch (err) {
      bannerText.textContent = `prediction service unreachable: ${err instanceof Error ? err.message : String(err)}`;
      banner.hidden = false;
    }
  }

  retryButton.addEventListener("click", () => void load());
  handle.ready = load();
  return handle;
}
