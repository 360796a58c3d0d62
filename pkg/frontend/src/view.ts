// Pure HTML renderers; the controller assigns the returned markup to the
// page. Keeping these as string functions lets tests assert on rendered
// output without a browser.

import { ChooseResult, ClarificationItem, Session } from "./api.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function clarificationCard(item: ClarificationItem, index: number): string {
  if (!item.passage_id) {
    // a clarification without a resolvable citation is a service bug;
    // surface it instead of hiding the item
    return `<li class="clarification invalid" data-index="${index}">
      <p class="error">missing citation for: ${escapeHtml(item.interpretation)}</p>
    </li>`;
  }
  const badge = item.cluster_size > 1 ? ` <span class="badge">x${item.cluster_size}</span>` : "";
  const snippet = item.snippet ? `<blockquote class="snippet">${escapeHtml(item.snippet)}</blockquote>` : "";
  return `<li class="clarification" data-index="${index}">
    <button class="choose" data-index="${index}">${escapeHtml(item.interpretation)}</button>${badge}
    ${snippet}
    <span class="citation">${escapeHtml(item.passage_id)}</span>
  </li>`;
}

export function renderClarifications(session: Session): string {
  const items = session.clarifications.items;
  if (items.length === 0) {
    return renderEmpty(session.original_query);
  }
  const cards = items.map(clarificationCard).join("\n");
  return `<section class="clarifications">
    <h2>Did you mean…</h2>
    <p class="query">for: ${escapeHtml(session.original_query)}</p>
    <ul>${cards}</ul>
  </section>`;
}

export function renderAnswer(item: ClarificationItem, result: ChooseResult): string {
  return `<section class="answer">
    <h2>${escapeHtml(item.interpretation)}</h2>
    <p class="answer-text">${escapeHtml(result.answer)}</p>
    <details class="citation" data-passage="${escapeHtml(result.passage_id)}">
      <summary>cited passage ${escapeHtml(result.passage_id)}</summary>
      <blockquote>${escapeHtml(result.snippet)}</blockquote>
    </details>
  </section>`;
}

export function renderEmpty(query: string): string {
  return `<section class="empty">
    <p>no grounded interpretations found for: ${escapeHtml(query)}</p>
  </section>`;
}

export function renderError(message: string, retryable = true): string {
  const retry = retryable ? `<button class="retry">retry</button>` : "";
  return `<section class="error">
    <p>${escapeHtml(message)}</p>
    ${retry}
  </section>`;
}

export function renderNotFound(): string {
  return renderError("this session no longer exists; start a new query", false);
}

export function renderLoading(): string {
  return `<section class="loading"><p>working…</p></section>`;
}
