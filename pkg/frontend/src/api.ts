import type {
  FeedbackBody,
  PostingDraft,
  StandardizeResponse,
  TypeaheadItem,
} from './types.js'

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`api error ${status}: ${detail}`)
  }
}

/** Thin typed client for the standardization service; no caching, no retry. */
export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, '')
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchImpl(`${this.baseUrl}${path}`, init)
    if (!res.ok) {
      let detail = res.statusText
      try {
        const body = await res.json()
        if (body && typeof body.detail === 'string') detail = body.detail
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(res.status, detail)
    }
    if (res.status === 204) return undefined as T
    return (await res.json()) as T
  }

  standardize(draft: PostingDraft): Promise<StandardizeResponse> {
    return this.request('/v1/standardize', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(draft),
    })
  }

  typeahead(q: string): Promise<TypeaheadItem[]> {
    return this.request(`/v1/titles/typeahead?q=${encodeURIComponent(q)}`)
  }

  feedback(body: FeedbackBody): Promise<void> {
    return this.request('/v1/feedback', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    })
  }
}
