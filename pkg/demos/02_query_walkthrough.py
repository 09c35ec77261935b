"""One instruction, traced through every retrieval stage."""

import affmem as am
from affmem.retrieval import (
    ROLE_TARGET,
    build_query,
    fuse,
    rerank,
    retrieve,
    traverse,
)

corpus = am.generate(
    am.GenParams(seed=7, n_envs=1, n_unambiguous=3, n_lexical=1, n_visual=1)
)
memory = am.build_memory(list(corpus.views), am.BuildConfig())
provider = am.MockProvider(memory.d_t, memory.d_m)
cfg = am.RetrievalConfig()

sample = corpus.samples[0]
instruction = sample.instruction
print("instruction:", instruction)

# Stage 0: split the instruction into the thing to pick and the place
# to put it.
target_phrase, receptacle_phrase = provider.decompose_instruction(instruction)
print("target phrase:    ", target_phrase)
print("receptacle phrase:", receptacle_phrase)

# Stage 1: beam-walk the tree top-down with the target phrase. Only the
# k_b best text matches per level descend further.
query = build_query(instruction, target_phrase, ROLE_TARGET, provider)
frontier, kept = traverse(memory, query, cfg.k_b)
for level in sorted(kept, reverse=True):
    print(f"level {level} survivors: {len(kept[level])} of "
          f"{len(memory.level_ids(level))}")
print("view frontier:", len(frontier), "views")

# Stage 2: blend text and visual similarity for every frontier view.
fused = fuse(memory, frontier, query, cfg.alpha)
print("\ntop fused views (alpha =", cfg.alpha, ")")
for view_id, score in fused[:5]:
    print(f"  {score:+.4f}  {memory.node(view_id).image_ref}")

# Stage 3: rerank the head of that list by asking which instances in
# those views actually afford picking and match the phrase.
entries = rerank(memory, fused, query, ROLE_TARGET, cfg, provider)
print("\nafter rerank:")
for e in entries[:5]:
    print(f"  rank {e.rank}  {e.score:+.4f}  [{e.stage}]  {e.image_ref}")

# The one-call version does all of the above for both roles.
result = retrieve(memory, instruction, cfg, provider)
print("\nfinal answer")
print("  target:    ", result.target.entries[0].image_ref)
print("  receptacle:", result.receptacle.entries[0].image_ref)
print("  ground truth:", sample.positives_target[0],
      "/", sample.positives_receptacle[0])
