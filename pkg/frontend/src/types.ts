export type EntityType = 'title' | 'skill' | 'company' | 'question_type'

export type FeedbackAction = 'accepted' | 'rejected' | 'overridden'

export interface Suggestion {
  entity_type: EntityType
  entity_id: string
  name: string
  score: number
  rank: number
}

export interface StandardizeResponse {
  suggestion_id: string
  titles: Suggestion[]
  skills: Suggestion[]
  company: Suggestion[]
  questions: Suggestion[]
  model_versions: Record<string, number>
  taxonomy_version: string
}

export interface PostingDraft {
  posting_id: string
  raw_title: string
  description?: string
  location?: string
  company_field?: string
  contact_email?: string
  industry?: string
}

export interface TypeaheadItem {
  id: string
  name: string
}

export interface FeedbackBody {
  suggestion_id: string
  entity_type: EntityType
  entity_id: string
  action: FeedbackAction
  replacement_entity_id?: string
}
