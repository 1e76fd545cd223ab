import type { StandardizeResponse, Suggestion } from '../src/types.js'

export function suggestion(partial: Partial<Suggestion> & { entity_id: string }): Suggestion {
  return {
    entity_type: 'skill',
    name: partial.entity_id,
    score: 0.5,
    rank: 1,
    ...partial,
  }
}

export function response(partial: Partial<StandardizeResponse> = {}): StandardizeResponse {
  return {
    suggestion_id: 'sug-1',
    titles: [],
    skills: [],
    company: [],
    questions: [],
    model_versions: { skill: 1 },
    taxonomy_version: 'v1',
    ...partial,
  }
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  })
}
