"""Link one sentence to Wikidata ids, then walk the graph around them.

Run: python demos/01_link_and_walk.py
"""

# %% A tiny hand-made gazetteer and graph
import warnings

from cbe.kgstore import KnowledgeGraph, Triple, entity_iri
from cbe.synthetic import INSTANCE_OF
from cbe.linker import Gazetteer, recognize_gazetteer
from cbe.walks import WalkConfig, generate_walks

text = "higher-calorie diets patients anorexia nervosa shorten hospital stays via"
gaz = Gazetteer(
    {
        "higher-calorie": ("Q26708069", None),
        "diets": ("Q474191", None),
        "patients": ("Q181600", None),
        "anorexia": ("Q254327", "Symptom"),
        "hospital": ("Q131749", None),
    }
)

# %% Greedy longest match returns one mention per covered span
mentions = recognize_gazetteer(text, gaz)
for m in mentions:
    print(f"{m.surface!r:18} {m.span} -> {m.qid}")

# %% Give a few of them neighbours so the walker has somewhere to go
eating_disorder, disease = entity_iri("Q12897"), entity_iri("Q12136")
g = KnowledgeGraph.from_triples(
    [
        Triple(entity_iri("Q254327"), INSTANCE_OF, eating_disorder),
        Triple(eating_disorder, INSTANCE_OF, disease),
        Triple(entity_iri("Q474191"), INSTANCE_OF, entity_iri("Q2095")),
    ]
)

# %% Walks alternate entity and predicate tokens; seeds missing from the graph get none
with warnings.catch_warnings():
    warnings.simplefilter("ignore")  # UnknownSeed for the three leaf entities
    walks = generate_walks(g, [entity_iri(m.qid) for m in mentions], WalkConfig(max_depth=4, max_walks=5, seed=0))
for seed, ws in walks.items():
    short = seed.rsplit("/", 1)[-1]
    print(short, [" ".join(t.rsplit("/", 1)[-1] for t in w.tokens) for w in ws])
