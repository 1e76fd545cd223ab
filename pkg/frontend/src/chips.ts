import type { FeedbackAction, FeedbackBody, Suggestion } from './types.js'

export type ChipState = 'pending' | FeedbackAction

/** Per-suggestion state machine: pending -> accepted | rejected | overridden.
 *
 * Terminal states never transition again, so repeated clicks or re-renders
 * can produce at most one feedback event per chip.
 */
export class SuggestionChip {
  private _state: ChipState = 'pending'

  constructor(
    public readonly suggestionId: string,
    public readonly suggestion: Suggestion,
  ) {}

  get state(): ChipState {
    return this._state
  }

  get terminal(): boolean {
    return this._state !== 'pending'
  }

  /** Apply a user action. Returns the feedback body to send, or null if the
   * chip already reached a terminal state (the action is ignored). */
  act(action: FeedbackAction, replacementEntityId?: string): FeedbackBody | null {
    if (this.terminal) return null
    if (action === 'overridden') {
      if (!replacementEntityId || replacementEntityId === this.suggestion.entity_id) {
        throw new Error('override needs a replacement different from the suggestion')
      }
    } else if (replacementEntityId !== undefined) {
      throw new Error(`${action} must not carry a replacement`)
    }
    this._state = action
    const body: FeedbackBody = {
      suggestion_id: this.suggestionId,
      entity_type: this.suggestion.entity_type,
      entity_id: this.suggestion.entity_id,
      action,
    }
    if (replacementEntityId !== undefined) body.replacement_entity_id = replacementEntityId
    return body
  }
}
