"""Deterministic sample taxonomy, embeddings, and synthetic seed data.

Everything here is seeded: the same seed produces byte-identical files, which
the determinism tests rely on. The taxonomy content is small but realistic
enough to exercise multiword aliases, shared aliases, and per-type attributes.
"""

from __future__ import annotations

import hashlib
import json
import random
from pathlib import Path

import numpy as np

from .features import EmbeddingTable, MarketStats, SentenceEncoder, extract
from .ranker import TrainingExample
from .tagger import JobPosting, build_matcher, tag, title_candidates
from .taxonomy import EntityType, Taxonomy, load_taxonomy, lookup
from .textnorm import tokenize

INDUSTRIES = ["tech", "finance", "health", "retail", "media", "manufacturing"]

LOCATIONS = [
    "San Francisco",
    "New York",
    "Austin",
    "Seattle",
    "Chicago",
    "Boston",
    "Denver",
    "Remote",
]

_SKILLS = [
    ("java", []), ("python", []), ("javascript", ["js"]), ("typescript", []),
    ("c++", ["cpp"]), ("c#", ["csharp"]), ("go", ["golang"]), ("rust", []),
    ("ruby", []), ("php", []), ("scala", []), ("kotlin", []), ("swift", []),
    ("sql", []), ("nosql", []), ("postgresql", ["postgres"]), ("mysql", []),
    ("mongodb", ["mongo"]), ("redis", []), ("elasticsearch", []),
    ("machine learning", ["ml"]), ("deep learning", []), ("data analysis", []),
    ("data mining", []), ("natural language processing", ["nlp"]),
    ("computer vision", []), ("reinforcement learning", []),
    ("statistics", []), ("linear algebra", []), ("probability", []),
    ("spark", ["apache spark"]), ("hadoop", []), ("kafka", ["apache kafka"]),
    ("airflow", []), ("hive", []), ("presto", []), ("flink", []),
    ("tensorflow", []), ("pytorch", []), ("scikit learn", ["sklearn"]),
    ("keras", []), ("xgboost", []), ("pandas", []), ("numpy", []),
    ("docker", []), ("kubernetes", ["k8s"]), ("terraform", []),
    ("ansible", []), ("jenkins", []), ("git", []), ("linux", []),
    ("aws", ["amazon web services"]), ("azure", []), ("gcp", ["google cloud"]),
    ("react", []), ("angular", []), ("vue", []), ("html", []), ("css", []),
    ("node", ["nodejs"]), ("django", []), ("flask", []), ("spring", []),
    ("rest api", ["rest"]), ("graphql", []), ("grpc", []),
    ("microservices", []), ("distributed systems", []),
    ("system design", []), ("agile", []), ("scrum", []), ("jira", []),
    ("project management", []), ("product management", []),
    ("stakeholder management", []), ("communication", []),
    ("leadership", []), ("mentoring", []), ("negotiation", []),
    ("accounting", []), ("financial modeling", []), ("risk management", []),
    ("portfolio management", []), ("equity research", []), ("derivatives", []),
    ("bookkeeping", []), ("auditing", []), ("taxation", []),
    ("nursing", []), ("patient care", []), ("phlebotomy", []),
    ("clinical research", []), ("pharmacology", []), ("medical coding", []),
    ("sales", []), ("cold calling", []), ("crm", ["salesforce"]),
    ("marketing", []), ("seo", ["search engine optimization"]),
    ("content writing", []), ("copywriting", []), ("social media", []),
    ("graphic design", []), ("photoshop", []), ("illustrator", []),
    ("video editing", []), ("supply chain", []), ("logistics", []),
    ("inventory management", []), ("lean manufacturing", []),
    ("six sigma", []), ("quality assurance", ["qa"]), ("welding", []),
    ("cnc machining", []), ("forklift operation", []), ("oracle", []),
]

_TITLES = [
    ("Software Engineer", ["software developer", "programmer"], "tech"),
    ("Senior Software Engineer", ["senior software developer"], "tech"),
    ("Staff Software Engineer", [], "tech"),
    ("Machine Learning Engineer", ["ml engineer"], "tech"),
    ("Senior Machine Learning Engineer", [], "tech"),
    ("Data Scientist", [], "tech"),
    ("Senior Data Scientist", [], "tech"),
    ("Data Engineer", [], "tech"),
    ("Data Analyst", [], "tech"),
    ("Backend Engineer", ["backend developer"], "tech"),
    ("Frontend Engineer", ["frontend developer"], "tech"),
    ("Full Stack Engineer", ["full stack developer"], "tech"),
    ("DevOps Engineer", [], "tech"),
    ("Site Reliability Engineer", ["sre"], "tech"),
    ("Security Engineer", [], "tech"),
    ("QA Engineer", ["test engineer"], "tech"),
    ("Mobile Engineer", ["mobile developer"], "tech"),
    ("Engineering Manager", [], "tech"),
    ("Technical Program Manager", [], "tech"),
    ("Product Manager", [], "tech"),
    ("Product Designer", [], "tech"),
    ("UX Designer", ["user experience designer"], "tech"),
    ("Research Scientist", [], "tech"),
    ("Applied Scientist", [], "tech"),
    ("Database Administrator", ["dba"], "tech"),
    ("Systems Administrator", ["sysadmin"], "tech"),
    ("Cloud Architect", [], "tech"),
    ("Solutions Architect", [], "tech"),
    ("Financial Analyst", [], "finance"),
    ("Senior Financial Analyst", [], "finance"),
    ("Investment Banker", [], "finance"),
    ("Portfolio Manager", [], "finance"),
    ("Risk Analyst", [], "finance"),
    ("Accountant", ["staff accountant"], "finance"),
    ("Senior Accountant", [], "finance"),
    ("Auditor", ["internal auditor"], "finance"),
    ("Tax Associate", [], "finance"),
    ("Actuary", [], "finance"),
    ("Registered Nurse", ["rn"], "health"),
    ("Nurse Practitioner", [], "health"),
    ("Medical Assistant", [], "health"),
    ("Clinical Research Coordinator", [], "health"),
    ("Pharmacist", [], "health"),
    ("Physical Therapist", [], "health"),
    ("Medical Coder", [], "health"),
    ("Sales Representative", ["sales rep"], "retail"),
    ("Account Executive", [], "retail"),
    ("Store Manager", [], "retail"),
    ("Retail Associate", ["sales associate"], "retail"),
    ("Customer Success Manager", [], "retail"),
    ("Marketing Manager", [], "media"),
    ("Content Strategist", [], "media"),
    ("Copywriter", [], "media"),
    ("Graphic Designer", [], "media"),
    ("Video Editor", [], "media"),
    ("Social Media Manager", [], "media"),
    ("Supply Chain Analyst", [], "manufacturing"),
    ("Logistics Coordinator", [], "manufacturing"),
    ("Production Supervisor", [], "manufacturing"),
    ("Quality Engineer", [], "manufacturing"),
    ("Process Engineer", [], "manufacturing"),
    ("Machinist", ["cnc machinist"], "manufacturing"),
]

_COMPANIES = [
    ("Acme Corporation", ["acme", "acme corp"]),
    ("Globex", ["globex corporation"]),
    ("Initech", []),
    ("Umbrella Labs", ["umbrella"]),
    ("Stark Industries", ["stark"]),
    ("Wayne Enterprises", ["wayne"]),
    ("Hooli", []),
    ("Pied Piper", []),
    ("Vandelay Industries", ["vandelay"]),
    ("Wonka Industries", ["wonka"]),
    ("Tyrell Corporation", ["tyrell"]),
    ("Cyberdyne Systems", ["cyberdyne"]),
    ("Oscorp", []),
    ("Oceanic Airlines", ["oceanic"]),
]

# (id suffix, canonical name, template with one {skill} placeholder)
_QUESTION_TYPES = [
    ("years_experience", "Years of Experience Question",
     "How many years of work experience do you have with {skill}?"),
    ("education_degree", "Education Degree Question",
     "Have you completed a bachelor degree or higher education?"),
    ("certification", "Certification Question",
     "Do you hold a current certification in {skill}?"),
    ("work_authorization", "Work Authorization Question",
     "Are you legally authorized to work in this country?"),
    ("remote_work", "Remote Work Question",
     "Are you comfortable working in a remote setting?"),
    ("onsite_commute", "Onsite Commute Question",
     "Are you able to commute to the office location daily?"),
    ("travel", "Travel Willingness Question",
     "Are you willing to travel for this role when required?"),
    ("language", "Language Proficiency Question",
     "What is your level of proficiency in spoken and written English?"),
    ("management", "Management Experience Question",
     "How many direct reports have you managed in previous roles?"),
    ("start_date", "Start Date Question",
     "How soon would you be available to start this position?"),
    ("relocation", "Relocation Question",
     "Are you open to relocating for this opportunity?"),
    ("shift_work", "Shift Work Question",
     "Are you able to work night shifts or weekend rotations?"),
    ("drivers_license", "Drivers License Question",
     "Do you have a valid drivers license and clean driving record?"),
    ("tool_proficiency", "Tool Proficiency Question",
     "Please rate your proficiency with {skill} on a scale of one to five."),
]

_FILLER_SENTENCES = [
    "Our benefits include generous paid time off and a wellness stipend",
    "The team ships new releases every two weeks",
    "We value a collaborative and inclusive culture",
    "This position reports to the head of the department",
    "Competitive salary and annual bonus are offered",
    "The office has free snacks and a gym on site",
    "We were founded over a decade ago and keep growing",
    "Applications are reviewed on a rolling basis",
    "Join a fast paced environment with real impact",
    "Relocation assistance is not provided for this opening",
]


def write_sample_taxonomy(path: str | Path) -> None:
    records = []
    for i, (name, aliases, industry) in enumerate(_TITLES, start=1):
        records.append(
            {"type": "title", "id": f"t{i:03d}", "name": name, "aliases": aliases,
             "attributes": {"industry": industry}}
        )
    for i, (name, aliases) in enumerate(_SKILLS, start=1):
        records.append(
            {"type": "skill", "id": f"s{i:03d}", "name": name, "aliases": aliases,
             "attributes": {}}
        )
    for i, (name, aliases) in enumerate(_COMPANIES, start=1):
        records.append(
            {"type": "company", "id": f"c{i:03d}", "name": name, "aliases": aliases,
             "attributes": {}}
        )
    for suffix, name, template in _QUESTION_TYPES:
        records.append(
            {"type": "question_type", "id": f"q_{suffix}", "name": name,
             "aliases": [], "attributes": {"template": template}}
        )
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def _token_vector(token: str, dimension: int) -> np.ndarray:
    seed = int.from_bytes(hashlib.sha256(token.encode("utf-8")).digest()[:8], "big")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dimension)
    return v / np.linalg.norm(v)


def build_sample_embeddings(taxonomy: Taxonomy, dimension: int = 32) -> EmbeddingTable:
    """Hash-seeded unit vectors for every token the sample corpus can produce,
    plus entity vectors as the normalized mean of alias token vectors."""
    vocab: set[str] = set()
    for e in taxonomy.entities:
        for alias in e.aliases:
            vocab.update(tokenize(alias))
        for value in e.attributes.values():
            vocab.update(tokenize(value))
    for sentence in _FILLER_SENTENCES + [t for _, _, t in _QUESTION_TYPES]:
        vocab.update(tokenize(sentence))
    for template in _DESCRIPTION_TEMPLATES:
        vocab.update(tokenize(template.replace("{skill}", " ")))
    table = EmbeddingTable(dimension)
    for token in sorted(vocab):
        table.add_word(token, _token_vector(token, dimension))
    for e in taxonomy.entities:
        toks = sorted({t for a in e.aliases for t in tokenize(a)})
        vecs = [_token_vector(t, dimension) for t in toks]
        v = np.mean(vecs, axis=0)
        norm = np.linalg.norm(v)
        if norm > 0:
            v = v / norm
        table.add_entity(e.entity_type, e.id, v)
    return table


_DESCRIPTION_TEMPLATES = [
    "We are looking for strong experience with {skill}.",
    "The ideal candidate is proficient in {skill} and related tools.",
    "Day to day work involves {skill} across multiple projects.",
    "Hands on knowledge of {skill} is required.",
    "You will collaborate with teams using {skill} daily.",
    "Expertise in {skill} is a big plus for this role.",
]


def generate_posting(taxonomy: Taxonomy, rng: random.Random, posting_id: str) -> tuple[JobPosting, dict]:
    """One synthetic posting plus its generator ground truth."""
    titles = taxonomy.of_type(EntityType.TITLE)
    skills = taxonomy.of_type(EntityType.SKILL)
    companies = taxonomy.of_type(EntityType.COMPANY)
    qtypes = taxonomy.of_type(EntityType.QUESTION_TYPE)

    title = rng.choice(titles)
    raw_title = rng.choice(sorted(title.aliases))
    industry = title.attributes.get("industry", rng.choice(INDUSTRIES))
    company = rng.choice(companies)
    n_skills = rng.randint(3, 8)
    chosen_skills = rng.sample(skills, n_skills)

    sentences = []
    for sk in chosen_skills:
        template = rng.choice(_DESCRIPTION_TEMPLATES)
        sentences.append(template.format(skill=rng.choice(sorted(sk.aliases))))
    question_truth = []
    for q in rng.sample(qtypes, rng.randint(0, 3)):
        template = q.attributes["template"]
        sentence = template.format(skill=rng.choice(sorted(chosen_skills[0].aliases)))
        sentences.append(sentence)
        question_truth.append(q.id)
    for _ in range(rng.randint(1, 3)):
        sentences.append(rng.choice(_FILLER_SENTENCES) + ".")
    rng.shuffle(sentences)

    domain_token = sorted(company.normalized_aliases(), key=len)[0].split(" ")[0]
    email = f"jobs@{domain_token}.com" if rng.random() < 0.7 else "jobs@example.com"

    posting = JobPosting(
        posting_id=posting_id,
        raw_title=raw_title,
        description=" ".join(sentences),
        location=rng.choice(LOCATIONS),
        company_field=company.canonical_name if rng.random() < 0.8 else rng.choice(sorted(company.aliases)),
        contact_email=email,
        industry=industry,
    )
    truth = {
        "title_id": title.id,
        "skill_ids": [s.id for s in chosen_skills],
        "company_id": company.id,
        "question_ids": question_truth,
    }
    return posting, truth


def posting_to_dict(posting: JobPosting) -> dict:
    return {
        "posting_id": posting.posting_id,
        "raw_title": posting.raw_title,
        "description": posting.description,
        "location": posting.location,
        "company_field": posting.company_field,
        "contact_email": posting.contact_email,
        "industry": posting.industry,
    }


def posting_from_dict(obj: dict) -> JobPosting:
    return JobPosting(
        posting_id=obj["posting_id"],
        raw_title=obj["raw_title"],
        description=obj.get("description", ""),
        location=obj.get("location", ""),
        company_field=obj.get("company_field", ""),
        contact_email=obj.get("contact_email", ""),
        industry=obj.get("industry", ""),
    )


def generate_seed_data(
    taxonomy: Taxonomy,
    table: EmbeddingTable,
    n_postings: int,
    seed: int,
):
    """Synthetic postings with per-type labeled training examples.

    Positives are the entities the generator intentionally embedded; negatives
    are random distractor candidates. Features come from an untrained encoder
    and empty market stats, matching what a bootstrap model would see.
    """
    rng = random.Random(seed)
    encoder = SentenceEncoder(table)
    stats = MarketStats()
    skill_matcher = build_matcher(taxonomy, EntityType.SKILL)
    company_matcher = build_matcher(taxonomy, EntityType.COMPANY)

    postings: list[tuple[JobPosting, dict]] = []
    examples: dict[EntityType, list[TrainingExample]] = {t: [] for t in EntityType}

    all_skills = [e.id for e in taxonomy.of_type(EntityType.SKILL)]
    all_titles = [e.id for e in taxonomy.of_type(EntityType.TITLE)]
    all_companies = [e.id for e in taxonomy.of_type(EntityType.COMPANY)]

    for i in range(n_postings):
        posting, truth = generate_posting(taxonomy, rng, f"p{i:05d}")
        postings.append((posting, truth))
        context = tag(skill_matcher, posting) + tag(company_matcher, posting)

        def fv(etype, eid, surface=None):
            return extract(posting, etype, eid, context, encoder, stats, taxonomy, surface=surface)

        # skills: tagged true skills are positive, tagged-but-unplanned or
        # random distractors negative
        tagged_skills = {m.entity_id for m in context if m.entity_type == EntityType.SKILL}
        for sid in sorted(tagged_skills):
            label = 1 if sid in truth["skill_ids"] else 0
            examples[EntityType.SKILL].append(
                TrainingExample(features=fv(EntityType.SKILL, sid), label=label)
            )
        for sid in rng.sample(sorted(set(all_skills) - tagged_skills), 3):
            examples[EntityType.SKILL].append(
                TrainingExample(features=fv(EntityType.SKILL, sid), label=0)
            )

        # titles: token-lookup candidates, true title positive
        cands = title_candidates(posting.raw_title, taxonomy)
        for tid in sorted(cands | {truth["title_id"]}):
            label = 1 if tid == truth["title_id"] else 0
            examples[EntityType.TITLE].append(
                TrainingExample(features=fv(EntityType.TITLE, tid, surface=posting.raw_title), label=label)
            )
        for tid in rng.sample(sorted(set(all_titles) - cands), 2):
            examples[EntityType.TITLE].append(
                TrainingExample(features=fv(EntityType.TITLE, tid, surface=posting.raw_title), label=0)
            )

        # companies
        tagged_companies = {m.entity_id for m in context if m.entity_type == EntityType.COMPANY}
        for cid in sorted(tagged_companies | {truth["company_id"]}):
            label = 1 if cid == truth["company_id"] else 0
            examples[EntityType.COMPANY].append(
                TrainingExample(features=fv(EntityType.COMPANY, cid), label=label)
            )
        for cid in rng.sample(sorted(set(all_companies) - tagged_companies), 2):
            examples[EntityType.COMPANY].append(
                TrainingExample(features=fv(EntityType.COMPANY, cid), label=0)
            )

        # question types: planned ones positive, two random others negative
        qt_all = [e.id for e in taxonomy.of_type(EntityType.QUESTION_TYPE)]
        for qid in truth["question_ids"]:
            examples[EntityType.QUESTION_TYPE].append(
                TrainingExample(features=fv(EntityType.QUESTION_TYPE, qid), label=1)
            )
        for qid in rng.sample(sorted(set(qt_all) - set(truth["question_ids"])), 2):
            examples[EntityType.QUESTION_TYPE].append(
                TrainingExample(features=fv(EntityType.QUESTION_TYPE, qid), label=0)
            )

    return postings, examples


def generate_labeled_sentences(taxonomy: Taxonomy, n: int, seed: int) -> tuple[list[str], list[str]]:
    """Template-generated (sentence, question-type id) pairs, with NONE
    sentences drawn from generic filler text."""
    rng = random.Random(seed)
    qtypes = taxonomy.of_type(EntityType.QUESTION_TYPE)
    skills = taxonomy.of_type(EntityType.SKILL)
    sentences, labels = [], []
    for _ in range(n):
        if rng.random() < 0.3:
            sentences.append(rng.choice(_FILLER_SENTENCES))
            labels.append("NONE")
        else:
            q = rng.choice(qtypes)
            skill = rng.choice(skills)
            sentences.append(q.attributes["template"].format(skill=skill.canonical_name))
            labels.append(q.id)
    return sentences, labels


def ensure_sample_data(data_dir: str | Path, dimension: int = 32):
    """Write taxonomy + embeddings into data_dir if absent; return both loaded."""
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    tax_path = data_dir / "sample_taxonomy.jsonl"
    emb_path = data_dir / "sample_embeddings.txt"
    if not tax_path.exists():
        write_sample_taxonomy(tax_path)
    taxonomy = load_taxonomy(tax_path)
    if not emb_path.exists():
        build_sample_embeddings(taxonomy, dimension).save(emb_path)
    table = EmbeddingTable.load(emb_path)
    return taxonomy, table
