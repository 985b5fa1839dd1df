/**
 * Chat controller: session lifecycle, submit flow, and transcript updates.
 *
 * One request is in flight per session at a time (input disabled while
 * waiting, matching the server's 409 rule). A message that hits a stale
 * session is retried once on a fresh session.
 */
import { ApiClient, ApiError } from "./api.js";
import { renderEntry, type TranscriptEntry } from "./view.js";

export class ChatApp {
  readonly root: HTMLElement;
  readonly client: ApiClient;
  private readonly doc: Document;
  private sessionId: string | null = null;
  private inFlight = false;

  transcriptEl!: HTMLElement;
  formEl!: HTMLFormElement;
  inputEl!: HTMLInputElement;
  fileEl!: HTMLInputElement;
  sendEl!: HTMLButtonElement;
  bannerEl!: HTMLElement;

  constructor(root: HTMLElement, client: ApiClient) {
    this.root = root;
    this.client = client;
    this.doc = root.ownerDocument;
    this.buildSkeleton();
  }

  private buildSkeleton(): void {
    const doc = this.doc;
    this.root.classList.add("chat-app");

    this.bannerEl = doc.createElement("div");
    this.bannerEl.className = "offline-banner";
    this.bannerEl.textContent = "Cannot reach the assistant. Check the service and retry.";
    this.bannerEl.hidden = true;

    this.transcriptEl = doc.createElement("div");
    this.transcriptEl.className = "transcript";

    this.formEl = doc.createElement("form");
    this.formEl.className = "composer";

    this.inputEl = doc.createElement("input");
    this.inputEl.type = "text";
    this.inputEl.className = "composer-text";
    this.inputEl.placeholder = "Ask about this image or about quality requirements";

    this.fileEl = doc.createElement("input");
    this.fileEl.type = "file";
    this.fileEl.className = "composer-file";
    this.fileEl.accept = ".png,.ppm,image/png";

    this.sendEl = doc.createElement("button");
    this.sendEl.type = "submit";
    this.sendEl.className = "composer-send";
    this.sendEl.textContent = "Send";
    this.sendEl.disabled = true; // empty input

    this.inputEl.addEventListener("input", () => this.refreshSendState());
    this.formEl.addEventListener("submit", (event) => {
      event.preventDefault();
      const file = this.fileEl.files && this.fileEl.files[0];
      void this.submitMessage(this.inputEl.value, file ?? null);
    });

    this.formEl.appendChild(this.inputEl);
    this.formEl.appendChild(this.fileEl);
    this.formEl.appendChild(this.sendEl);
    this.root.appendChild(this.bannerEl);
    this.root.appendChild(this.transcriptEl);
    this.root.appendChild(this.formEl);
  }

  private refreshSendState(): void {
    this.sendEl.disabled = this.inFlight || this.inputEl.value.trim() === "";
    this.inputEl.disabled = this.inFlight;
    this.fileEl.disabled = this.inFlight;
  }

  private appendEntry(entry: TranscriptEntry): HTMLElement {
    const element = renderEntry(this.doc, entry);
    this.transcriptEl.appendChild(element);
    return element;
  }

  private async ensureSession(): Promise<string> {
    if (this.sessionId === null) {
      this.sessionId = await this.client.createSession();
    }
    return this.sessionId;
  }

  /** Submit one message (used by the form handler and by tests). */
  async submitMessage(text: string, image: File | null = null): Promise<void> {
    const trimmed = text.trim();
    if (trimmed === "" || this.inFlight) {
      return;
    }
    this.inFlight = true;
    this.refreshSendState();
    let imageUrl: string | null = null;
    if (image && typeof URL !== "undefined" && typeof URL.createObjectURL === "function") {
      imageUrl = URL.createObjectURL(image);
    }
    this.appendEntry({ role: "user", text: trimmed, imageUrl });
    try {
      const answer = await this.postWithRetry(trimmed, image);
      this.bannerEl.hidden = true;
      this.appendEntry({
        role: "assistant",
        text: answer.text,
        toolResults: answer.tool_results,
        citations: answer.citations,
      });
    } catch (error) {
      if (error instanceof ApiError) {
        this.appendEntry({ role: "system", text: `Error: ${error.message}` });
      } else {
        this.bannerEl.hidden = false;
      }
    } finally {
      this.inFlight = false;
      this.inputEl.value = "";
      this.fileEl.value = "";
      this.refreshSendState();
    }
  }

  private async postWithRetry(text: string, image: File | null) {
    const sessionId = await this.ensureSession();
    try {
      return await this.client.postMessage(sessionId, text, image);
    } catch (error) {
      if (error instanceof ApiError && error.status === 404) {
        // stale session (e.g. server restart): create a new one, retry once
        this.sessionId = await this.client.createSession();
        return await this.client.postMessage(this.sessionId, text, image);
      }
      throw error;
    }
  }
}

export function createChatApp(root: HTMLElement, client: ApiClient): ChatApp {
  return new ChatApp(root, client);
}

function autoMount(): void {
  if (typeof document === "undefined") {
    return;
  }
  const root = document.getElementById("app");
  if (!root) {
    return;
  }
  const meta = document.querySelector('meta[name="faceoracle-base"]');
  const base =
    (meta && meta.getAttribute("content")) || "http://127.0.0.1:8000";
  createChatApp(root as HTMLElement, new ApiClient(base));
}

autoMount();
