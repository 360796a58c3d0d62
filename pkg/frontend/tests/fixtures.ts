// Canned service payloads mirroring the insurance fixture corpus.

import { ChooseResult, Session } from "../src/api";

export function rentalCarsSession(): Session {
  return {
    session_id: "sess-1",
    original_query: "rental cars",
    clarifications: {
      query: "rental cars",
      source: "verdict",
      items: [
        {
          interpretation: "Does my auto policy cover rental cars I drive after an accident?",
          answer: "Yes, most policies extend collision and liability coverage to personal-use rentals.",
          passage_id: "ins01",
          cluster_size: 2,
          snippet: "Collision coverage on a personal auto policy generally extends to rental vehicles…",
        },
        {
          interpretation: "Will my policy pay for a rental car while my vehicle is repaired?",
          answer: "Rental reimbursement coverage pays for a rental during covered repairs.",
          passage_id: "ins02",
          cluster_size: 2,
          snippet: "Rental reimbursement is an optional coverage that pays a daily allowance…",
        },
      ],
    },
    chosen: null,
    answer_shown: null,
    created_at: "2026-01-01T00:00:00+00:00",
  };
}

export function chooseResult(): ChooseResult {
  return {
    answer: "Yes, most policies extend collision and liability coverage to personal-use rentals.",
    passage_id: "ins01",
    snippet: "Collision coverage on a personal auto policy generally extends to rental vehicles…",
  };
}

export function emptySession(): Session {
  const session = rentalCarsSession();
  session.clarifications.items = [];
  return session;
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}
