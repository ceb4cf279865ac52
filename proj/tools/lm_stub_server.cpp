// Apache License, Version 2.0, refer to LICENSE.txt
//
// Serves a language model over the external-LM wire protocol. Backed by
// either a saved n-gram model file or a uniform distribution; intended
// for protocol testing and as a reference for real serving processes.

#include <unistd.h>

#include <csignal>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "limerick/external_lm.hpp"
#include "limerick/lm.hpp"

int main(int argc, char** argv) {
  CLI::App app{"external language model stub server"};
  std::string vocab_path;
  std::string model_path;
  std::string direction = "forward";
  int port = 7070;
  app.add_option("--vocab", vocab_path, "vocabulary file")->required();
  app.add_option("--model", model_path,
                 "n-gram model file (omit for a uniform model)");
  app.add_option("--direction", direction,
                 "direction of the uniform model (ignored with --model)");
  app.add_option("--port", port, "listen port");
  CLI11_PARSE(app, argc, argv);

  try {
    limerick::Vocabulary vocab = limerick::Vocabulary::load(vocab_path);
    std::optional<limerick::NGramModel> ngram;
    std::optional<limerick::UniformModel> uniform;
    const limerick::LanguageModel* model = nullptr;
    if (!model_path.empty()) {
      ngram = limerick::NGramModel::load(model_path);
      model = &*ngram;
    } else {
      uniform.emplace(limerick::direction_from_string(direction),
                      vocab.size());
      model = &*uniform;
    }

    limerick::LmStubServer server(*model, vocab);
    server.start(port);
    std::cout << "serving " << (model_path.empty() ? "uniform" : "n-gram")
              << " model (" << limerick::to_string(model->direction())
              << ", |V|=" << vocab.size() << ") on port " << server.port()
              << '\n';
    // Runs until killed.
    ::pause();
    server.stop();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
