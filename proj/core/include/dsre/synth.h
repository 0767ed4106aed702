#ifndef DSRE_SYNTH_H_
#define DSRE_SYNTH_H_

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "dsre/corpus.h"
#include "dsre/embeddings.h"
#include "dsre/lexicon.h"
#include "dsre/model.h"
#include "dsre/triplets.h"

namespace dsre {

// Knobs of the templated synthetic world. Relation sentences carry a cue
// phrase tied to their label; pool sentences pair two irrelevant-group
// concepts; noise sentences scatter random mentions of any group.
struct SynthOptions {
  std::size_t diso_concepts = 20;
  std::size_t anat_concepts = 10;
  std::size_t chem_concepts = 12;
  std::size_t gene_concepts = 8;
  std::size_t triplets = 30;
  std::size_t sentences = 1000;
  std::size_t sentences_per_doc = 10;
  double relation_rate = 0.3;
  double pool_rate = 0.3;
  double noise_rate = 0.0;
  double titled_doc_rate = 0.2;  // docs titled by a concept, with long-distance sentences
  double missing_cui_rate = 0.1;  // concepts left out of the CUI table
  std::size_t cui_dim = 32;
  std::uint64_t seed = 1;
};

struct SynthWorld {
  RelationSchema schema;
  Lexicon lexicon;
  TripletStore triplets;
  HierarchyEdges hierarchy;
  std::string corpus_jsonl;  // raw documents, the ingest format
  std::string pages_jsonl;   // semi-structured pages
  std::string heading_rules_json;
  EmbeddingTable cui_vectors;
  std::set<std::string> irrelevant_groups;
};

// DDx (DISO-DISO, undirected), MC (DISO -> DISO) and IN (DISO -> ANAT).
RelationSchema synth_schema();

SynthWorld make_synth_world(const SynthOptions& options);

// Bags for the fusion experiment: in half of them the label is spelled out
// by a cue word and the entity vectors are noise; in the other half the text
// is neutral and the label is encoded in the head entity's vector.
struct FusionTask {
  std::vector<BagInput> inputs;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  Vocabulary vocab;
  std::vector<std::string> label_names;
  std::size_t cui_dim = 0;
};

struct FusionTaskOptions {
  std::size_t labels = 4;  // including NA
  std::size_t bags = 400;
  std::size_t instances_per_bag = 3;
  std::size_t cui_dim = 16;
  double train_fraction = 0.8;
  std::uint64_t seed = 1;
};

FusionTask make_fusion_task(const FusionTaskOptions& options);

}  // namespace dsre

#endif  // DSRE_SYNTH_H_
