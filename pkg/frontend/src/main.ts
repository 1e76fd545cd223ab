import { ApiClient, ApiError } from './api.js'
import { PostingFlow, SECTIONS, type Section } from './flow.js'
import type { FeedbackAction, TypeaheadItem } from './types.js'

const SECTION_LABELS: Record<Section, string> = {
  titles: 'Standardized titles',
  skills: 'Suggested skills',
  company: 'Company',
  questions: 'Screening questions',
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag)
  if (className) node.className = className
  if (text !== undefined) node.textContent = text
  return node
}

function baseUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get('api')
  return fromQuery ?? 'http://127.0.0.1:8000'
}

export function mount(root: HTMLElement): void {
  const flow = new PostingFlow(new ApiClient(baseUrl()))

  const form = el('form', 'draft')
  const title = el('input')
  title.placeholder = 'Job title'
  title.required = true
  const dropdown = el('ul', 'typeahead hidden')
  const description = el('textarea')
  description.placeholder = 'Job description'
  const location = el('input')
  location.placeholder = 'Location'
  const email = el('input')
  email.placeholder = 'Contact email'
  const submit = el('button', undefined, 'Get suggestions')
  const status = el('p', 'status')
  const results = el('div', 'results')

  const titleWrap = el('div', 'title-wrap')
  titleWrap.append(title, dropdown)
  form.append(titleWrap, description, location, email, submit)
  root.append(form, status, results)

  let typeaheadTimer: number | undefined
  title.addEventListener('input', () => {
    window.clearTimeout(typeaheadTimer)
    const q = title.value.trim()
    if (!q) {
      dropdown.classList.add('hidden')
      return
    }
    typeaheadTimer = window.setTimeout(async () => {
      try {
        renderTypeahead(await flow.typeahead(q))
      } catch {
        dropdown.classList.add('hidden')
      }
    }, 150)
  })

  function renderTypeahead(items: TypeaheadItem[]): void {
    dropdown.replaceChildren()
    if (!items.length) {
      dropdown.classList.add('hidden')
      return
    }
    for (const item of items) {
      const li = el('li', undefined, item.name)
      li.addEventListener('click', async () => {
        title.value = item.name
        dropdown.classList.add('hidden')
        if (flow.response) {
          // choice after suggestions were shown: accept or override
          await flow.chooseTitle(item).catch(showError)
          renderSections()
        }
      })
      dropdown.append(li)
    }
    dropdown.classList.remove('hidden')
  }

  form.addEventListener('submit', async (ev) => {
    ev.preventDefault()
    await standardize()
  })
  description.addEventListener('blur', () => {
    if (title.value.trim() && description.value.trim()) void standardize()
  })

  async function standardize(): Promise<void> {
    status.textContent = 'Standardizing…'
    try {
      const applied = await flow.standardize({
        posting_id: `ui-${Date.now()}`,
        raw_title: title.value,
        description: description.value,
        location: location.value,
        contact_email: email.value,
      })
      if (applied === null) return // a newer request superseded this one
      status.textContent = ''
      renderSections()
    } catch (err) {
      showError(err)
    }
  }

  function showError(err: unknown): void {
    status.textContent =
      err instanceof ApiError ? `Service error: ${err.detail}` : 'Service unreachable — try again.'
    const retry = el('button', undefined, 'Retry')
    retry.addEventListener('click', () => void standardize())
    status.append(' ', retry)
  }

  function renderSections(): void {
    results.replaceChildren()
    for (const section of SECTIONS) {
      const suggestions = flow.sectionSuggestions(section)
      if (!suggestions.length) continue
      const box = el('section')
      box.append(el('h3', undefined, SECTION_LABELS[section]))
      for (const s of suggestions) {
        const chip = flow.chip(section, s.entity_id)
        const row = el('div', `chip ${chip.state}`)
        row.append(el('span', 'name', s.name), el('span', 'score', s.score.toFixed(3)))
        if (!chip.terminal) {
          for (const action of ['accepted', 'rejected'] as FeedbackAction[]) {
            const btn = el('button', undefined, action === 'accepted' ? 'Accept' : 'Reject')
            btn.addEventListener('click', async () => {
              await flow.act(section, s.entity_id, action).catch(showError)
              renderSections()
            })
            row.append(btn)
          }
        } else {
          row.append(el('em', undefined, chip.state))
        }
        box.append(row)
      }
      results.append(box)
    }
  }
}

const root = document.getElementById('app')
if (root) mount(root)
