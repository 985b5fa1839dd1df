/**
 * Transcript rendering. Everything shown comes from the API response;
 * the view never synthesizes values or citations.
 */
import type { CitationPayload, ToolResult } from "./api.js";

export interface TranscriptEntry {
  role: "user" | "assistant" | "system";
  text: string;
  imageUrl?: string | null;
  toolResults?: ToolResult[];
  citations?: CitationPayload[];
}

/** Display banding for at-a-glance triage (not a standard threshold). */
export function qualityBand(quality: number): "band-low" | "band-mid" | "band-high" {
  if (quality <= 33) return "band-low";
  if (quality <= 66) return "band-mid";
  return "band-high";
}

export function formatCitation(citation: CitationPayload): string {
  return `${citation.doc_id} — page ${citation.page}, ¶${citation.paragraph}`;
}

export function dedupCitations(citations: CitationPayload[]): CitationPayload[] {
  const seen = new Set<string>();
  const unique: CitationPayload[] = [];
  for (const citation of citations) {
    if (!seen.has(citation.chunk_id)) {
      seen.add(citation.chunk_id);
      unique.push(citation);
    }
  }
  return unique;
}

function renderToolTable(doc: Document, toolResults: ToolResult[]): HTMLTableElement {
  const table = doc.createElement("table");
  table.className = "tool-table";
  const head = table.createTHead().insertRow();
  for (const label of ["Measure", "Value"]) {
    const cell = doc.createElement("th");
    cell.textContent = label;
    head.appendChild(cell);
  }
  const body = table.createTBody();
  for (const tool of toolResults) {
    const row = body.insertRow();
    const measureCell = row.insertCell();
    measureCell.className = "measure";
    measureCell.textContent = tool.measure_id;
    const valueCell = row.insertCell();
    valueCell.className = `value ${qualityBand(tool.quality)}`;
    valueCell.textContent = String(tool.quality);
  }
  return table;
}

function renderCitationPanel(
  doc: Document,
  citations: CitationPayload[],
): HTMLElement {
  const panel = doc.createElement("div");
  panel.className = "citations";
  const heading = doc.createElement("div");
  heading.className = "citations-heading";
  heading.textContent = "Sources";
  panel.appendChild(heading);
  for (const citation of dedupCitations(citations)) {
    const row = doc.createElement("div");
    row.className = "citation-row";
    const label = doc.createElement("button");
    label.type = "button";
    label.className = "citation-label";
    label.textContent = formatCitation(citation);
    const excerpt = doc.createElement("blockquote");
    excerpt.className = "citation-text";
    excerpt.textContent = citation.text;
    excerpt.hidden = true;
    label.addEventListener("click", () => {
      excerpt.hidden = !excerpt.hidden;
    });
    row.appendChild(label);
    row.appendChild(excerpt);
    panel.appendChild(row);
  }
  return panel;
}

export function renderEntry(doc: Document, entry: TranscriptEntry): HTMLElement {
  const container = doc.createElement("div");
  container.className = `entry role-${entry.role}`;
  const text = doc.createElement("div");
  text.className = "entry-text";
  text.textContent = entry.text;
  container.appendChild(text);
  if (entry.imageUrl) {
    const thumb = doc.createElement("img");
    thumb.className = "thumb";
    thumb.src = entry.imageUrl;
    thumb.alt = "attached image";
    container.appendChild(thumb);
  }
  if (entry.toolResults && entry.toolResults.length) {
    container.appendChild(renderToolTable(doc, entry.toolResults));
  }
  if (entry.citations && entry.citations.length) {
    container.appendChild(renderCitationPanel(doc, entry.citations));
  }
  return container;
}
