#include "hsal/experiment.hpp"

namespace hsal {

PreparedData prepare(const Dataset& ds, bool use_sequels, std::size_t targets_per_user) {
  PreparedData d;
  d.n_users = ds.n_users();
  d.n_items = ds.n_items();
  d.split = leave_one_out(ds);
  std::vector<Series> catalog;
  if (use_sequels) catalog = ds.series;
  d.train_graph = SequelAwareGraph::build(d.split.train, catalog, d.n_users, d.n_items);
  std::vector<Interaction> context = d.split.train;
  context.insert(context.end(), d.split.validation.begin(), d.split.validation.end());
  d.test_graph = SequelAwareGraph::build(context, catalog, d.n_users, d.n_items);
  d.examples = make_examples(d.split.train, targets_per_user);
  d.validation = make_cases(d.split.validation, d.split.train);
  d.test = make_cases(d.split.test, context);
  return d;
}

ExperimentResult run_experiment(const PreparedData& data, const ExperimentConfig& cfg,
                                std::uint64_t seed, const EpochCallback& on_epoch) {
  auto model = cfg.model;
  model.n_users = data.n_users;
  model.n_items = data.n_items;
  ExperimentResult r{ModelParams::init(model, seed), {}, {}};
  if (cfg.train_model) {
    auto tc = cfg.train;
    tc.seed = seed;
    r.training = train(r.params, data.train_graph, data.examples, data.validation, tc, on_epoch);
  }
  r.test = evaluate(data.test, model_scorer(r.params, data.test_graph, cfg.eval.sampling),
                    cfg.eval);
  return r;
}

}  // namespace hsal
