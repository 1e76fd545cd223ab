import type { ApiClient } from './api.js'
import { SuggestionChip } from './chips.js'
import type {
  FeedbackAction,
  PostingDraft,
  StandardizeResponse,
  Suggestion,
  TypeaheadItem,
} from './types.js'

export type Section = 'titles' | 'skills' | 'company' | 'questions'

export const SECTIONS: Section[] = ['titles', 'skills', 'company', 'questions']

/** Drives the posting flow: one in-flight standardize request (latest wins),
 * chips keyed by (section, entity_id), and the title-override rule.
 *
 * Every entity id held here was taken verbatim from an API response; the flow
 * never fabricates ids.
 */
export class PostingFlow {
  private seq = 0
  private applied = 0
  response: StandardizeResponse | null = null
  chips = new Map<string, SuggestionChip>()

  constructor(private api: ApiClient) {}

  private chipKey(section: Section, entityId: string): string {
    return `${section}:${entityId}`
  }

  /** Standardize the draft. A response that arrives after a newer request was
   * issued is discarded and does not touch the current chips. Returns the
   * response when it was applied, null when stale. */
  async standardize(draft: PostingDraft): Promise<StandardizeResponse | null> {
    const ticket = ++this.seq
    const response = await this.api.standardize(draft)
    if (ticket < this.seq || ticket <= this.applied) return null
    this.applied = ticket
    this.response = response
    this.chips = new Map()
    for (const section of SECTIONS) {
      for (const s of response[section]) {
        this.chips.set(this.chipKey(section, s.entity_id), new SuggestionChip(response.suggestion_id, s))
      }
    }
    return response
  }

  chip(section: Section, entityId: string): SuggestionChip {
    const chip = this.chips.get(this.chipKey(section, entityId))
    if (!chip) throw new Error(`unknown suggestion ${section}/${entityId}`)
    return chip
  }

  /** Act on a chip; sends exactly one feedback call the first time and none
   * afterwards. Resolves to true when an event was sent. */
  async act(
    section: Section,
    entityId: string,
    action: FeedbackAction,
    replacementEntityId?: string,
  ): Promise<boolean> {
    const body = this.chip(section, entityId).act(action, replacementEntityId)
    if (body === null) return false
    await this.api.feedback(body)
    return true
  }

  /** The typeahead choice for the title field: picking a suggested title
   * accepts its chip; picking any other standardized title overrides the
   * top-ranked suggestion with the chosen id. */
  async chooseTitle(choice: TypeaheadItem): Promise<boolean> {
    if (!this.response) throw new Error('no standardize response yet')
    const suggested = this.response.titles.find((t) => t.entity_id === choice.id)
    if (suggested) return this.act('titles', suggested.entity_id, 'accepted')
    const top = this.response.titles.find((t) => t.rank === 1)
    if (!top) return false
    return this.act('titles', top.entity_id, 'overridden', choice.id)
  }

  typeahead(q: string): Promise<TypeaheadItem[]> {
    return this.api.typeahead(q)
  }

  sectionSuggestions(section: Section): Suggestion[] {
    return this.response ? this.response[section] : []
  }
}
