// Typed client for the clarification service JSON API.
//
// The UI never touches the corpus or models directly; everything rendered
// comes from these endpoints.

export interface ClarificationItem {
  interpretation: string;
  answer: string;
  passage_id: string | null;
  cluster_size: number;
  snippet?: string;
}

export interface ClarificationSet {
  query: string;
  source: string;
  items: ClarificationItem[];
}

export interface Session {
  session_id: string;
  original_query: string;
  clarifications: ClarificationSet;
  chosen: number | null;
  answer_shown: string | null;
  created_at: string;
}

export interface ChooseResult {
  answer: string;
  passage_id: string;
  snippet: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

export type FetchFn = typeof fetch;

async function request<T>(fetchFn: FetchFn, url: string, init?: RequestInit): Promise<T> {
  let res: Response;
  try {
    res = await fetchFn(url, init);
  } catch (err) {
    throw new ApiError(0, "network_error", String(err));
  }
  let body: any = null;
  try {
    body = await res.json();
  } catch {
    // non-JSON body; fall through to status handling
  }
  if (!res.ok) {
    const code = body?.code ?? "http_error";
    const message = body?.message ?? `service returned ${res.status}`;
    throw new ApiError(res.status, code, message);
  }
  return body as T;
}

function post(payload: unknown): RequestInit {
  return {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(payload),
  };
}

export class ClarifyApi {
  constructor(
    private baseUrl = "",
    private fetchFn: FetchFn = fetch.bind(globalThis),
  ) {}

  clarify(query: string): Promise<Session> {
    return request(this.fetchFn, `${this.baseUrl}/clarify`, post({ query }));
  }

  getSession(sessionId: string): Promise<Session> {
    return request(this.fetchFn, `${this.baseUrl}/session/${encodeURIComponent(sessionId)}`);
  }

  choose(sessionId: string, index: number): Promise<ChooseResult> {
    return request(
      this.fetchFn,
      `${this.baseUrl}/session/${encodeURIComponent(sessionId)}/choose`,
      post({ index }),
    );
  }
}
