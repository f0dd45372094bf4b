// Typed client for the annotation service HTTP API.

export type Suggestion = {
  label: string;
  score: number;
  threshold: number;
  suggested: boolean;
};

export type DecisionAction = "accept" | "reject" | "add";

export type Decision = {
  seq: number;
  idx: number;
  label: string;
  action: DecisionAction;
};

export type SentencePayload = {
  idx: number;
  text: string;
  suggestions: Suggestion[];
  decisions: Decision[];
};

export type DocumentResponse = {
  doc_id: string;
  sentences: SentencePayload[];
};

export type TaxonomyLeaf = {
  id: string;
  name: string;
  description: string;
  trained: boolean;
};

export type TaxonomyGroup = { id: string; name: string; t3: TaxonomyLeaf[] };
export type TaxonomyPillar = { id: string; name: string; t2: TaxonomyGroup[] };
export type TaxonomyTree = { t1: TaxonomyPillar[] };

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let code = "error";
    let message = `${response.status}`;
    try {
      const body = (await response.json()) as { code?: string; message?: string };
      code = body.code ?? code;
      message = body.message ?? message;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, code, message);
  }
  return (await response.json()) as T;
}

export class AnnotationApi {
  constructor(
    private baseUrl: string = "",
    private fetchFn: typeof fetch = fetch,
  ) {}

  health(): Promise<{ status: string }> {
    return this.fetchFn(`${this.baseUrl}/health`).then((r) => asJson(r));
  }

  taxonomy(): Promise<TaxonomyTree> {
    return this.fetchFn(`${this.baseUrl}/taxonomy`).then((r) => asJson(r));
  }

  submitDocument(text: string): Promise<DocumentResponse> {
    return this.fetchFn(`${this.baseUrl}/documents`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    }).then((r) => asJson(r));
  }

  postDecision(
    docId: string,
    idx: number,
    label: string,
    action: DecisionAction,
  ): Promise<Decision> {
    return this.fetchFn(`${this.baseUrl}/documents/${docId}/decisions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ idx, label, action }),
    }).then((r) => asJson(r));
  }

  async exportGold(docId: string): Promise<string> {
    const response = await this.fetchFn(`${this.baseUrl}/documents/${docId}/export`);
    if (!response.ok) {
      throw new ApiError(response.status, "export_failed", `${response.status}`);
    }
    return response.text();
  }
}
