#!/usr/bin/env python3
"""Regenerates the bundled fixture corpora.

The outputs are checked in; rerunning this script must reproduce them
byte for byte. Golden task JSONL under fixtures/golden is NOT written here:
it comes from `enteval datagen` (see README).
"""

import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent
SOURCES = ROOT / "sources"
WIKI = ROOT / "wiki"
TOY = ROOT / "toytrain"

rng = random.Random(42)

FIRST = ["amber", "basil", "cedar", "dusk", "ember", "frost", "garnet", "hazel",
         "ivory", "jade", "kestrel", "linden", "maple", "nettle", "onyx"]
KINDS = {
    "city": ("falls", "harbor", "crossing", "gate"),
    "person": ("reed", "marsh", "holt", "vance"),
    "company": ("works", "holdings", "labs", "foundry"),
    "river": ("river", "creek", "stream", "brook"),
}
REGIONS = ["norland", "southmark", "eastvale", "westreach"]
FEATURES = {
    "city": ["markets", "bridges", "towers", "festivals", "harbors", "gardens"],
    "person": ["paintings", "poems", "speeches", "inventions", "novels", "songs"],
    "company": ["engines", "software", "textiles", "ships", "glass", "tools"],
    "river": ["fish", "rapids", "floods", "mills", "canyons", "wetlands"],
}
NOUN = {"city": "city", "person": "painter", "company": "company", "river": "river"}


def title(words):
    return " ".join(w.capitalize() for w in words)


def make_entities():
    entities = []
    for kind, suffixes in KINDS.items():
        for k in range(15):
            name = title([FIRST[k], suffixes[k % len(suffixes)]])
            region = REGIONS[(k + len(entities)) % len(REGIONS)]
            f1, f2 = rng.sample(FEATURES[kind], 2)
            desc = (f"{name} is a {NOUN[kind]} in {region} . "
                    f"it is known for its {f1} and {f2} .").lower().split()
            entities.append({"entity_id": name, "title": name, "kind": kind,
                             "region": region, "description": desc})
    return entities


ENTITIES = make_entities()
BY_KIND = {k: [e for e in ENTITIES if e["kind"] == k] for k in KINDS}


def write_lines(path, lines):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(l + "\n" for l in lines))


def jsonl(path, rows):
    write_lines(path, [json.dumps(r, separators=(",", ":")) for r in rows])


def descriptions():
    jsonl(SOURCES / "descriptions.jsonl",
          [{"entity_id": e["entity_id"], "title": e["title"], "description": e["description"]}
           for e in ENTITIES])
    write_lines(SOURCES / "alignment.tsv",
                ["# short names used by the relatedness lists",
                 "Amber\tAmber Falls", "Basil\tBasil Reed"])


def vectors(vocab):
    # four latent directions (one per entity kind) plus noise
    kind_of = {}
    for kind, words in FEATURES.items():
        for w in words:
            kind_of[w] = kind
    for e in ENTITIES:
        for w in e["entity_id"].lower().split():
            kind_of.setdefault(w, e["kind"])
    axes = list(KINDS)
    lines = []
    for w in sorted(vocab):
        v = [rng.gauss(0, 0.3) for _ in range(8)]
        if w in kind_of:
            v[axes.index(kind_of[w])] += 1.0
        lines.append(w + " " + " ".join(f"{x:.4f}" for x in v))
    write_lines(SOURCES / "vectors.txt", lines)


def preco(vocab):
    docs = []
    for d in range(16):
        people = rng.sample(BY_KIND["person"], 2)
        city = rng.choice(BY_KIND["city"])
        a, b = (p["entity_id"].lower().split() for p in people)
        c = city["entity_id"].lower().split()
        s0 = a + ["met"] + b + ["in"] + c + ["."]
        s1 = a + ["later", "praised"] + b + ["near", "the", "river", "where", "he", "smiled", "."]
        s2 = ["she", "thanked", "him", "in"] + c + ["."]
        clusters = [
            [[0, 0, 2], [1, 0, 2], [1, 10, 11], [2, 2, 3]],  # a, a, he, him
            [[0, 3, 5], [1, 4, 6], [2, 0, 1]],               # b, b, she
            [[0, 6, 8], [2, 4, 6]],                          # city twice
            [[1, 7, 9]],                                     # the river
        ]
        docs.append({"id": f"doc{d}", "sentences": [s0, s1, s2], "mention_clusters": clusters})
        for s in (s0, s1, s2):
            vocab.update(s)
    jsonl(SOURCES / "preco.jsonl", docs)


CONCEPTS = {
    "animal": ["dog", "cat", "horse", "sparrow", "salmon", "rabbit", "goat", "owl"],
    "tool": ["hammer", "knife", "saw", "drill", "needle", "shovel", "ladder", "brush"],
    "place": ["kitchen", "garage", "forest", "river", "barn", "library", "office", "garden"],
    "act": ["cutting", "digging", "painting", "sewing", "climbing", "drilling", "building", "cleaning"],
}


def conceptnet(vocab):
    lines, ner = [], []
    k = 0

    def add(rel, start, end, surface, lang=("en", "en"), types=("PRODUCT", "PRODUCT")):
        nonlocal k
        edge = f"/a/[/r/{rel}/,/c/{lang[0]}/{start}/,/c/{lang[1]}/{end}/]"
        info = json.dumps({"surfaceText": surface})
        lines.append(f"{edge}\t/r/{rel}\t/c/{lang[0]}/{start}\t/c/{lang[1]}/{end}\t{info}")
        toks = surface.replace("[[", " ").replace("]]", " ").lower().split()
        vocab.update(toks)
        # NER spans are the concept spans, recomputed the way the reader does
        spans, pos, rest = [], 0, surface
        while "[[" in rest:
            before, after = rest.split("[[", 1)
            pos += len(before.split())
            inner, rest = after.split("]]", 1)
            n = len(inner.split())
            spans.append([pos, pos + n - 1])
            pos += n
        n = min(len(spans), len(types))
        ner.append({"instance_id": edge, "spans": spans[:n], "types": list(types[:n])})
        k += 1

    for tool, act in zip(CONCEPTS["tool"], CONCEPTS["act"]):
        add("UsedFor", tool, act, f"[[a {tool}]] is used for [[{act}]]")
    for animal, place in zip(CONCEPTS["animal"], CONCEPTS["place"]):
        add("AtLocation", animal, place, f"[[a {animal}]] can live in [[the {place}]]")
    for tool, place in zip(CONCEPTS["tool"], reversed(CONCEPTS["place"])):
        add("AtLocation", tool, place, f"[[a {tool}]] is kept in [[the {place}]]")
    # dropped: related-to, non-English, "likely to find", date entity, no NER
    add("RelatedTo", "dog", "cat", "[[dog]] is related to [[cat]]")
    add("IsA", "hund", "tier", "[[hund]] is a [[tier]]", lang=("de", "de"))
    add("AtLocation", "owl", "forest", "you are likely to find [[an owl]] in [[a forest]]")
    add("IsA", "monday", "day", "[[monday]] is a [[day]]", types=("DATE", "DATE"))
    add("IsA", "goat", "animal", "[[a goat]] is an [[animal]]", types=("PRODUCT",))
    write_lines(SOURCES / "conceptnet.tsv", lines)
    jsonl(SOURCES / "cerp_ner.jsonl", ner)


def fever(vocab):
    claims = []
    for k, e in enumerate(ENTITIES[:48]):
        name = e["entity_id"].lower().split()
        if k % 3 == 0:
            label, rest = "SUPPORTS", ["is", "in", e["region"]]
        elif k % 3 == 1:
            other = REGIONS[(REGIONS.index(e["region"]) + 1) % 4]
            label, rest = "REFUTES", ["is", "in", other]
        else:
            label, rest = "NOT ENOUGH INFO", ["is", "famous"]
        toks = name + rest + ["."]
        vocab.update(toks)
        mentions = [[0, len(name) - 1]] if k != 4 else []
        claims.append({"id": 1000 + k, "label": label, "claim": " ".join(toks), "mentions": mentions})
    jsonl(SOURCES / "fever.jsonl", claims)


TYPES = ["entity", "person", "location", "organization", "city", "artist",
         "company", "river", "body_of_water", "place"]
KIND_TYPES = {
    "city": ["location", "city", "place"],
    "person": ["person", "artist"],
    "company": ["organization", "company"],
    "river": ["location", "river", "body_of_water"],
}


def typing(vocab):
    write_lines(SOURCES / "types.txt", TYPES)
    order = ENTITIES[:]
    rng.shuffle(order)
    for split, chunk in (("train", order[:30]), ("dev", order[30:45]), ("test", order[45:60])):
        rows = []
        for e in chunk:
            left = ["yesterday", "we", "read", "about"]
            right = ["and", "its", "history", "."]
            vocab.update(left + right + e["entity_id"].lower().split())
            rows.append({"left_context_token": left, "mention_span": e["entity_id"],
                         "right_context_token": right, "y_str": ["entity"] + KIND_TYPES[e["kind"]]})
        jsonl(SOURCES / f"typing_{split}.json", rows)


def kb_tuples():
    lines = ["# entity1\trelation\tentity2"]
    rels = [("based_in", "company", "city"), ("born_in", "person", "city"),
            ("flows_past", "river", "city"), ("founded", "person", "company")]
    for rel, k1, k2 in rels:
        seen = set()
        while len(seen) < 30:
            a = rng.choice(BY_KIND[k1])["entity_id"]
            b = rng.choice(BY_KIND[k2])["entity_id"]
            seen.add((a, b))
        lines += [f"{a}\t{rel}\t{b}" for a, b in sorted(seen)]
    # too small to fill 5 / 10 / 10
    for k in range(6):
        lines.append(f"{BY_KIND['river'][k]['entity_id']}\tjoins\t{BY_KIND['river'][k + 1]['entity_id']}")
    write_lines(SOURCES / "kb_tuples.tsv", lines)


def relatedness():
    lines = []
    for seed in (BY_KIND["city"][0], BY_KIND["person"][1], BY_KIND["company"][2]):
        same = [e for e in BY_KIND[seed["kind"]] if e is not seed]
        other = [e for e in ENTITIES if e["kind"] != seed["kind"]]
        cands = same[:10] + rng.sample(other, 10)
        lines.append(seed["entity_id"])
        lines += ["\t" + c["entity_id"] for c in cands]
    write_lines(SOURCES / "kore.txt", lines)
    for name, n in (("wikisrs_rel.csv", 18), ("wikisrs_sim.csv", 16)):
        rows = ["Term1,Term2,Mean,Std"]
        for k in range(n):
            a, b = rng.sample(ENTITIES, 2)
            score = 4.0 if a["kind"] == b["kind"] else 1.0
            score += round(rng.uniform(0, 2), 2)
            left = "Amber" if k == 0 else a["entity_id"]
            rows.append(f"{left},{b['entity_id']},{score},0.5")
        write_lines(SOURCES / name, rows)


def aida(vocab):
    lines, cw = [], {}
    docs = [("1 train", 6), ("2 train", 6), ("3 train", 6), ("4 train", 6), ("5 train", 6),
            ("947testa A", 5), ("948testa B", 5), ("1163testb C", 5), ("1164testb D", 5)]
    count = 0
    for doc_id, n in docs:
        lines.append(f"-DOCSTART- ({doc_id})")
        for s in range(n):
            e = ENTITIES[(count * 7) % len(ENTITIES)]
            words = e["entity_id"].split()
            surface = words[0]
            lines.append("Reports")
            lines.append("mention")
            for k, w in enumerate(words if count % 5 else words[:1]):
                tag = "B" if k == 0 else "I"
                mention = e["entity_id"] if count % 5 else surface
                lines.append(f"{w}\t{tag}\t{mention}\t{e['entity_id'].replace(' ', '_')}\thttp://x\t1\t/m/1")
            lines.append(".")
            if s == 0:
                lines += ["Unknown\tB\tUnknown\t--NME--", "."]
            lines.append("")
            vocab.update(["reports", "mention", ".", "unknown"] + [w.lower() for w in words])
            key = e["entity_id"] if count % 5 else surface
            cands = cw.setdefault(key, [])
            if count % 6 != 3 and e["entity_id"] not in [c for c, _ in cands]:
                cands.append((e["entity_id"], 0.5 if count % 2 else 0.3))
            for other in rng.sample([x for x in ENTITIES if x is not e], 3):
                if other["entity_id"] not in [c for c, _ in cands]:
                    cands.append((other["entity_id"], round(rng.uniform(0.05, 0.4), 3)))
            count += 1
    write_lines(SOURCES / "aida.tsv", lines)
    cw_lines = []
    for mention in sorted(cw):
        for ent, p in cw[mention]:
            cw_lines.append(f"{mention}\t{p} {ent.replace(' ', '_')}")
    write_lines(SOURCES / "crosswikis.tsv", cw_lines)
    assert count == 50


def rare(vocab):
    rows = []
    for k in range(44):
        gold = ENTITIES[(k * 11) % len(ENTITIES)]
        same = [e for e in BY_KIND[gold["kind"]] if e is not gold]
        cands = [gold] + rng.sample(same, 3)
        rng.shuffle(cands)
        f = gold["description"][-4]
        doc = f"critics praised __blank__ for its {f} in {gold['region']} ."
        vocab.update(doc.split())
        row = {"id": k, "document": doc, "candidates": [c["entity_id"] for c in cands],
               "answer": gold["entity_id"]}
        if k == 43:
            row["candidates"] = row["candidates"][:3]
        rows.append(row)
    jsonl(SOURCES / "rare.jsonl", rows)


# ---------------------------------------------------------------- wiki dump

PAGES = [
    # (title, ns, redirect, text); the pair count each page contributes is
    # in the comment
    ("Amber Falls", 0, None,
     "'''Amber Falls''' is a city in [[Norland]]. It lies on the [[Silver River|river Silver]] "
     "and near [[Mount Gray]]."),                                              # 3
    ("Norland", 0, None,
     "'''Norland''' is a region in the north. Its capital is [[Amber Falls]]."),  # 1
    ("Silver River", 0, None,
     "{{Infobox river|length=200}}\nThe '''Silver River''' flows through [[Norland]] and "
     "[[Amber Falls]]."),                                                      # 2
    ("Mount Gray", 0, None,
     "'''Mount Gray''' is a mountain.<ref>Some [[Source Book]] citation</ref> It is near "
     "[[Lake Blue]]."),                                                        # 1
    ("Lake Blue", 0, None,
     "'''Lake Blue''' is a lake fed by the [[Silver River]]. See [[Missing Page]] for more."),  # 1
    ("River Silver", 0, "Silver River", "#REDIRECT [[Silver River]]"),         # 0
    ("Old Norland", 0, None, "#REDIRECT [[Norland]]"),                         # 0
    ("Jon Reed", 0, None,
     "'''Jon Reed''' was a painter from [[Old Norland]]. He painted [[Lake Blue]] and "
     "[[River Silver]] in 1901."),                                             # 3
    ("Category:Rivers", 14, None, "[[Silver River]] is a river."),             # 0
    ("Talk:Jon Reed", 1, None, "Is [[Jon Reed]] notable?"),                    # 0
    ("Gray Company", 0, None,
     "'''Gray Company''' is a firm founded by [[Jon Reed]].\n[[Category:Firms]]\n"
     "[[de:Graue Firma]]"),                                                    # 1
    ("Empty Page", 0, None, "{{stub}}"),                                       # 0
    ("Red Town", 0, None,
     "'''Red Town''' is a town. It was once called [[Empty Page]]."),          # 0
    ("Blue Hills", 0, None,
     "'''Blue Hills''' are hills east of [[amber Falls|Amber]]."),             # 1
    ("Harbor Bay", 0, None,
     "'''Harbor Bay''' is a bay.\n\n== History ==\nTraders from [[Gray Company]] arrived. "
     "Later [[Jon Reed]] visited."),                                           # 2
    ("Long Description", 0, None,
     "'''Long Description''' is a long article about [[Norland]]. "
     + " ".join(f"word{k}" for k in range(140)) + " end."),                   # 1
    ("Quiet Village", 0, None,
     "'''Quiet Village''' is near [[Long Description]]."),                     # 1
    ("External", 0, None,
     "'''External''' has a site [http://example.com the site] and links to [[Harbor Bay]]."),  # 1
    ("Nested", 0, None,
     "'''Nested''' has {{outer|{{inner|x}}}} templates.\n{| class=wikitable\n|-\n"
     "| [[Amber Falls]]\n|}\nIt borders [[Red Town]]."),                       # 1
    ("Cross", 0, None,
     "'''Cross''' is a place near [[Blue Hills|the blue hills. Far]] away. It is small "
     "and near [[Nested]]."),                                                  # 1
]
WIKI_PAIRS = 20


def wiki():
    out = ['<mediawiki xmlns="http://www.mediawiki.org/xml/export-0.10/" xml:lang="en">']
    esc = lambda s: s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")
    for k, (t, ns, redirect, text) in enumerate(PAGES):
        out.append("  <page>")
        out.append(f"    <title>{esc(t)}</title>")
        out.append(f"    <ns>{ns}</ns>")
        out.append(f"    <id>{k + 1}</id>")
        if redirect:
            out.append(f'    <redirect title="{esc(redirect)}" />')
        out.append("    <revision>")
        out.append(f"      <id>{100 + k}</id>")
        out.append(f'      <text bytes="{len(text)}" xml:space="preserve">{esc(text)}</text>')
        out.append("    </revision>")
        out.append("  </page>")
    out.append("</mediawiki>")
    write_lines(WIKI / "dump.xml", out)
    write_lines(WIKI / "expected_pairs.txt", [str(WIKI_PAIRS)])


# ---------------------------------------------------------- toytrain corpus

def toytrain():
    ents = [e for e in ENTITIES if e["kind"] in ("city", "river")][:20]
    descs = []
    for e in ents:
        # short descriptions keep the toy vocabulary small
        descs.append({"entity_id": e["entity_id"], "title": e["title"],
                      "description": e["description"][:8]})
    verbs = ["visited", "crossed", "left", "reached", "saw"]
    subjects = ["the traveler", "a merchant", "the soldiers", "my friend"]
    pairs = []
    for k in range(100):
        e = ents[k % len(ents)]
        subj = subjects[k % len(subjects)].split()
        verb = verbs[(k // 4) % len(verbs)]
        name = e["entity_id"].lower().split()
        ctx = subj + [verb] + name + ["in", e["region"], "."]
        start = len(subj) + 1
        pairs.append({"id": f"toy-{k}", "context": ctx, "span": [start, start + len(name) - 1],
                      "entity_id": e["entity_id"]})
    jsonl(TOY / "pairs.jsonl", pairs)
    jsonl(TOY / "descriptions.jsonl", descs)


def main():
    vocab = set()
    for e in ENTITIES:
        vocab.update(e["description"])
    descriptions()
    preco(vocab)
    conceptnet(vocab)
    fever(vocab)
    typing(vocab)
    kb_tuples()
    relatedness()
    aida(vocab)
    rare(vocab)
    vectors(vocab)
    wiki()
    toytrain()


if __name__ == "__main__":
    main()
