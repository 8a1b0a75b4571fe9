#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "rankformer/checkpoint.hpp"
#include "rankformer/synthetic.hpp"

using namespace rankformer;

TEST_CASE("checkpoint round trip at float32 precision") {
  const Mat z = random_embeddings(12, 6, 5);
  const auto path = std::filesystem::temp_directory_path() / "rf_ckpt.bin";
  save_checkpoint(path, z, 7, 5, {{"tau", "0.5"}, {"alpha", "2"}});

  const auto loaded = load_checkpoint(path);
  CHECK(loaded.n == 7);
  CHECK(loaded.m == 5);
  CHECK(loaded.z.rows() == 12);
  CHECK(loaded.z.cols() == 6);
  CHECK((loaded.z - z).cwiseAbs().maxCoeff() < 1e-6);

  const auto manifest = load_manifest(path);
  CHECK(manifest.at("tau") == "0.5");
  CHECK(manifest.at("alpha") == "2");
  CHECK(manifest.at("n") == "7");

  // Header layout: magic + three u32 fields = 16 bytes before the payload.
  CHECK(std::filesystem::file_size(path) == 16 + 12 * 6 * sizeof(float));

  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".manifest");
}

TEST_CASE("checkpoint rejects a bad magic") {
  const auto path = std::filesystem::temp_directory_path() / "rf_bad_ckpt.bin";
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE this is not a checkpoint";
  }
  CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  std::filesystem::remove(path);
}
