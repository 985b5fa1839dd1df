/**
 * Typed client for the faceoracle HTTP API.
 *
 * Multipart bodies are encoded by hand into a Uint8Array so the same code
 * path runs in browsers and under Node's fetch in tests.
 */

export interface ToolResult {
  measure_id: string;
  quality: number;
  raw: number;
}

export interface CitationPayload {
  chunk_id: string;
  doc_id: string;
  page: number;
  paragraph: number;
  text: string;
}

export interface AnswerPayload {
  session_id: string;
  text: string;
  citations: CitationPayload[];
  tool_results: ToolResult[];
}

export interface AssessPayload {
  image_id: string;
  components: Record<string, ToolResult>;
  unified: ToolResult | null;
  face_region: {
    left: number;
    top: number;
    width: number;
    height: number;
    source: string;
  };
}

export class ApiError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type MultipartField =
  | { name: string; value: string }
  | { name: string; filename: string; contentType: string; data: Uint8Array };

async function fileBytes(file: File): Promise<Uint8Array> {
  if (typeof file.arrayBuffer === "function") {
    return new Uint8Array(await file.arrayBuffer());
  }
  // engines without Blob.arrayBuffer: fall back to FileReader
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onerror = () => reject(reader.error);
    reader.onload = () => resolve(new Uint8Array(reader.result as ArrayBuffer));
    reader.readAsArrayBuffer(file);
  });
}

async function encodeMultipart(
  fields: MultipartField[],
): Promise<{ body: Uint8Array<ArrayBuffer>; contentType: string }> {
  const boundary =
    "----faceoracle" + Math.random().toString(16).slice(2) + Date.now().toString(16);
  const encoder = new TextEncoder();
  const chunks: Uint8Array[] = [];
  for (const field of fields) {
    chunks.push(encoder.encode(`--${boundary}\r\n`));
    if ("value" in field) {
      chunks.push(
        encoder.encode(
          `Content-Disposition: form-data; name="${field.name}"\r\n\r\n${field.value}\r\n`,
        ),
      );
    } else {
      chunks.push(
        encoder.encode(
          `Content-Disposition: form-data; name="${field.name}"; filename="${field.filename}"\r\n` +
            `Content-Type: ${field.contentType}\r\n\r\n`,
        ),
      );
      chunks.push(field.data);
      chunks.push(encoder.encode("\r\n"));
    }
  }
  chunks.push(encoder.encode(`--${boundary}--\r\n`));
  const total = chunks.reduce((n, c) => n + c.byteLength, 0);
  const body = new Uint8Array(total);
  let offset = 0;
  for (const chunk of chunks) {
    body.set(chunk, offset);
    offset += chunk.byteLength;
  }
  return { body, contentType: `multipart/form-data; boundary=${boundary}` };
}

async function parseOrThrow<T>(response: Response): Promise<T> {
  if (response.ok) {
    return (await response.json()) as T;
  }
  let code = "http_error";
  let message = `HTTP ${response.status}`;
  try {
    const payload = (await response.json()) as { code?: string; message?: string };
    if (payload.code) code = payload.code;
    if (payload.message) message = payload.message;
  } catch {
    // non-JSON error body; keep the generic message
  }
  throw new ApiError(code, message, response.status);
}

export class ApiClient {
  constructor(public readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async health(): Promise<boolean> {
    try {
      const response = await fetch(this.url("/health"));
      return response.ok;
    } catch {
      return false;
    }
  }

  async createSession(): Promise<string> {
    const response = await fetch(this.url("/sessions"), { method: "POST" });
    const payload = await parseOrThrow<{ session_id: string }>(response);
    return payload.session_id;
  }

  async postMessage(
    sessionId: string,
    text: string,
    image?: File | null,
    facebox?: string,
  ): Promise<AnswerPayload> {
    const fields: MultipartField[] = [{ name: "text", value: text }];
    if (facebox) {
      fields.push({ name: "facebox", value: facebox });
    }
    if (image) {
      fields.push({
        name: "image",
        filename: image.name || "upload",
        contentType: image.type || "application/octet-stream",
        data: await fileBytes(image),
      });
    }
    const { body, contentType } = await encodeMultipart(fields);
    const response = await fetch(this.url(`/sessions/${sessionId}/messages`), {
      method: "POST",
      headers: { "Content-Type": contentType },
      body,
    });
    return parseOrThrow<AnswerPayload>(response);
  }

  async assess(
    image: File,
    measures?: string[],
    facebox?: string,
  ): Promise<AssessPayload> {
    const fields: MultipartField[] = [];
    if (measures && measures.length) {
      fields.push({ name: "measures", value: measures.join(",") });
    }
    if (facebox) {
      fields.push({ name: "facebox", value: facebox });
    }
    fields.push({
      name: "image",
      filename: image.name || "upload",
      contentType: image.type || "application/octet-stream",
      data: await fileBytes(image),
    });
    const { body, contentType } = await encodeMultipart(fields);
    const response = await fetch(this.url("/assess"), {
      method: "POST",
      headers: { "Content-Type": contentType },
      body,
    });
    return parseOrThrow<AssessPayload>(response);
  }
}
