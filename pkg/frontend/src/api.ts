/** Typed client for the paintword HTTP API. All image pixels displayed by
 * the UI originate from these responses; the client never synthesizes or
 * mutates image content. */

import { consumeEventStream, StreamEvent } from "./sse.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

export interface SessionInfo {
  session_id: string;
  seed: number;
  image_url: string;
}

export interface EditLaunch {
  edit_id: string;
  stream_url: string;
}

export interface SessionSummary {
  session_id: string;
  state: string;
  history: Array<Record<string, unknown>>;
  [key: string]: unknown;
}

export interface ModelEntry {
  name: string;
  kind: string;
  transport: string;
  capabilities: Record<string, unknown>;
}

async function raiseForStatus(response: Response): Promise<void> {
  if (response.ok) return;
  let code = "HTTP_ERROR";
  let message = `${response.status}`;
  try {
    const body = (await response.json()) as { code?: string; message?: string };
    code = body.code ?? code;
    message = body.message ?? message;
  } catch {
    // non-JSON error body; keep defaults
  }
  throw new ApiError(response.status, code, message);
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    await raiseForStatus(response);
    return (await response.json()) as T;
  }

  createSession(body: {
    generator: string;
    scorer: string;
    seed?: number;
  }): Promise<SessionInfo> {
    return this.json("/v1/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  sessionSummary(sessionId: string): Promise<SessionSummary> {
    return this.json(`/v1/sessions/${sessionId}`);
  }

  async imageBytes(sessionId: string): Promise<Uint8Array> {
    return this.bytes(`/v1/sessions/${sessionId}/image`);
  }

  async bytes(path: string): Promise<Uint8Array> {
    const response = await this.fetchImpl(this.baseUrl + path);
    await raiseForStatus(response);
    return new Uint8Array(await response.arrayBuffer());
  }

  putMask(
    sessionId: string,
    png: Uint8Array,
  ): Promise<{ mask_coverage: number }> {
    return this.json(`/v1/sessions/${sessionId}/mask`, {
      method: "PUT",
      headers: { "content-type": "image/png" },
      body: png as BodyInit,
    });
  }

  startEdit(
    sessionId: string,
    body: {
      text: string;
      lambda_img?: number;
      seed?: number;
      schedule?: Record<string, unknown>;
    },
  ): Promise<EditLaunch> {
    return this.json(`/v1/sessions/${sessionId}/edits`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  streamEdit(
    streamUrl: string,
    onEvent: (event: StreamEvent) => void,
  ): Promise<StreamEvent> {
    return consumeEventStream(this.baseUrl + streamUrl, onEvent, this.fetchImpl);
  }

  acceptEdit(sessionId: string, editId: string): Promise<SessionSummary> {
    return this.json(`/v1/sessions/${sessionId}/edits/${editId}/accept`, {
      method: "POST",
    });
  }

  revertEdit(sessionId: string, editId: string): Promise<SessionSummary> {
    return this.json(`/v1/sessions/${sessionId}/edits/${editId}/revert`, {
      method: "POST",
    });
  }

  async models(): Promise<ModelEntry[]> {
    const body = await this.json<{ models: ModelEntry[] }>("/v1/models");
    return body.models;
  }
}
