// Generates a few desk-scale scenes, trains briefly, and completes a held-out
// scan. Prints metrics of the raw scan and of the completion.
//
//   complete_demo [steps]

#include <cstdlib>
#include <iostream>

#include "liflow/liflow.hpp"

int main(int argc, char** argv) {
  using namespace liflow;
  const std::size_t steps = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 300;

  SceneDistribution dist;
  std::vector<TrainingCase> cases;
  for (std::uint64_t i = 0; i < 16; ++i) {
    SceneCase c = make_case(dist, derive_seed(7, i));
    cases.push_back({std::move(c.scene), std::move(c.scan)});
  }
  const SceneCase held_out = make_case(dist, derive_seed(8, 0));

  FieldConfig field;
  const VectorFieldNet net(field);
  ModelState state = net.initial_state();
  OptimizerState opt = OptimizerState::for_size(net.parameter_count());
  opt.learning_rate = 3e-3;

  TrainConfig tc;
  tc.epochs = 1000;
  tc.batch_size = 1;
  tc.max_steps = steps;
  tc.noise_scale = 0.25;
  tc.ema_decay = 0.995;
  train(net, state, opt, cases, tc, [](const StepLog& s) {
    if (s.step % 50 == 0) std::cout << "step " << s.step << " loss " << s.loss.total << '\n';
  });

  SamplerConfig sampler;
  sampler.guidance_weight = 2.0;
  const Trajectory traj = complete_scene(net, state, held_out.scan, 10, {0.25, 1}, sampler);

  EvalConfig eval;
  eval.bev_extent = {-3, 3, -3, 3};
  write_table(std::cout, {{"scan", eval_all(held_out.scan, held_out.scene, eval)},
                          {"completion", eval_all(traj.final_state, held_out.scene, eval)}});
  return 0;
}
