// Typed client for the prediction service. The console performs no
// prediction logic of its own; everything shown on screen comes verbatim
// from these responses.

export interface SchemaField {
  name: string;
  type: "timestamp" | "enum" | "int" | "float" | "bool" | "set" | "string";
  required: boolean;
  feature_set: "FS1" | "FS2";
  values?: Array<string | number>;
}

export interface ServiceSchema {
  fields: SchemaField[];
}

export interface HealthResponse {
  status: "ready" | "not-ready";
  model_version: string | null;
}

export interface PredictionResponse {
  request_id: string | null;
  band: "S" | "M" | "L";
  band_probabilities: [number, number, number];
  duration_minutes: number;
  model_version: string;
  feature_set_used: "FS1" | "FS2";
  recommended_actions: string[];
}

export interface FieldErrors {
  error: string;
  fields?: Record<string, string>;
}

export class ServiceError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly fields: Record<string, string> = {},
  ) {
    super(message);
  }
}

export type IncidentFields = Record<string, string | number | boolean | string[]>;

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  async health(): Promise<HealthResponse> {
    const resp = await fetch(`${this.baseUrl}/v1/health`);
    return (await resp.json()) as HealthResponse;
  }

  async schema(): Promise<ServiceSchema> {
    const resp = await fetch(`${this.baseUrl}/v1/schema`);
    if (!resp.ok) {
      throw new ServiceError(`schema request failed with status ${resp.status}`, resp.status);
    }
    return (await resp.json()) as ServiceSchema;
  }

  async predict(incident: IncidentFields, requestId: string): Promise<PredictionResponse> {
    const resp = await fetch(`${this.baseUrl}/v1/predict`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ request_id: requestId, incident }),
    });
    const body = await resp.json();
    if (!resp.ok) {
      const err = body as FieldErrors;
      throw new ServiceError(err.error ?? `predict failed with status ${resp.status}`, resp.status, err.fields ?? {});
    }
    return body as PredictionResponse;
  }
}
