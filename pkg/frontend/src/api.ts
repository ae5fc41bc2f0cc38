import type {
  HealthInfo,
  PredictRequest,
  PredictResponse,
  SentenceDetail,
  SentenceSummary,
  SpeakerInfo,
} from "./types";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function asJson<T>(resp: Response): Promise<T> {
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    const message = (body as { error?: string }).error ?? resp.statusText;
    throw new ApiError(resp.status, message);
  }
  return body as T;
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  health(): Promise<HealthInfo> {
    return fetch(`${this.baseUrl}/api/health`).then((r) => asJson<HealthInfo>(r));
  }

  sentences(): Promise<SentenceSummary[]> {
    return fetch(`${this.baseUrl}/api/sentences`).then((r) => asJson<SentenceSummary[]>(r));
  }

  sentence(id: string): Promise<SentenceDetail> {
    return fetch(`${this.baseUrl}/api/sentences/${encodeURIComponent(id)}`).then((r) =>
      asJson<SentenceDetail>(r),
    );
  }

  speakers(): Promise<SpeakerInfo[]> {
    return fetch(`${this.baseUrl}/api/speakers`).then((r) => asJson<SpeakerInfo[]>(r));
  }

  styles(): Promise<{ id: number }[]> {
    return fetch(`${this.baseUrl}/api/styles`).then((r) => asJson<{ id: number }[]>(r));
  }

  predict(request: PredictRequest): Promise<PredictResponse> {
    return fetch(`${this.baseUrl}/api/predict`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
    }).then((r) => asJson<PredictResponse>(r));
  }
}
