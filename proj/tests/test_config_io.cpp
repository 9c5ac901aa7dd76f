#include <doctest.h>

#include <fstream>

#include "gestura/config.hpp"
#include "gestura/dataset_io.hpp"
#include "gestura/errors.hpp"
#include "support.hpp"

using namespace gestura;

namespace {

std::string config_error(const std::string& text) {
    try {
        parse_config(text, "t.toml");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("presets round-trip through TOML") {
    for (const auto& c : {ExperimentConfig::desk(), ExperimentConfig::paper()}) {
        CHECK_NOTHROW(c.validate());
        const auto text = to_toml(c);
        CHECK(parse_config(text) == c);
        CHECK(to_toml(parse_config(text)) == text);
    }
    CHECK(parse_config("") == ExperimentConfig::desk());
    CHECK(parse_config("scale = \"paper\"\n") == ExperimentConfig::paper());
}

TEST_CASE("edited values survive the round trip") {
    auto c = ExperimentConfig::desk();
    c.seed = 123456789012345ULL;
    c.dataset.seed = c.seed;
    c.federated.partition = PartitionKind::Iid;
    c.federated.inverse_frequency_weights = true;
    c.evaluation.micro_f1 = true;
    c.evaluation.baselines = {Modality::Emg};
    c.rl.episodes = 17;
    CHECK(parse_config(to_toml(c)) == c);
}

TEST_CASE("config errors carry source, line and field") {
    const auto unknown = config_error("seed = 1\n[dataset]\nsample_count = 10\nbogus = 3\n");
    CHECK(unknown.find("t.toml:4") != std::string::npos);
    CHECK(unknown.find("dataset.bogus") != std::string::npos);

    const auto type = config_error("[federated]\n\nrounds = \"many\"\n");
    CHECK(type.find("t.toml:3") != std::string::npos);
    CHECK(type.find("federated.rounds") != std::string::npos);

    CHECK(config_error("mystery = 1\n").find("mystery") != std::string::npos);
    CHECK(config_error("scale = \"huge\"\n").find("scale") != std::string::npos);
    CHECK(config_error("[federated]\npartition = \"random\"\n").find("t.toml:2") != std::string::npos);
    CHECK(config_error("[evaluation]\nbaselines = [\"sonar\"]\n").find("evaluation.baselines") != std::string::npos);
    CHECK_FALSE(config_error("[rl]\nlearning_rate = 0.0\n").empty());
    CHECK_FALSE(config_error("[dataset]\nsplit = [0.98, 0.01, 0.01]\nparticipant_count = 40\n").empty());
    CHECK_FALSE(config_error("this is not toml").empty());
}

TEST_CASE("load_config reads files") {
    testing::TempDir dir("cfg");
    write_text(dir.path() / "a.toml", "seed = 9\n");
    CHECK(load_config(dir.path() / "a.toml").seed == 9);
    CHECK_THROWS_AS(load_config(dir.path() / "missing.toml"), ConfigError);
}

}  // TEST_SUITE

TEST_SUITE("dataset_io") {

TEST_CASE("dataset round trip") {
    DatasetSpec spec;
    spec.sample_count = 45;
    spec.participant_count = 10;
    spec.seed = 31;
    spec.synth.frame_size = 8;
    spec.synth.series_length = 16;
    spec.synth.electrodes = 4;
    const auto ds = generate_dataset(spec);
    const auto split = split_dataset(ds, spec);
    const auto parts = partition_clients(ds, split.train, 3, 2);

    testing::TempDir a("ds-a"), b("ds-b");
    write_dataset(ds, split, a.path(), parts);
    write_dataset(ds, split, b.path(), parts);
    CHECK(sha256_file(a.path() / kDatasetSamples) == sha256_file(b.path() / kDatasetSamples));
    CHECK(sha256_file(a.path() / kDatasetManifest) == sha256_file(b.path() / kDatasetManifest));

    const auto back = read_dataset(a.path());
    CHECK(back.spec == ds.spec);
    CHECK(back.adjacency == ds.adjacency);
    REQUIRE(back.participants.size() == ds.participants.size());
    for (std::size_t i = 0; i < ds.participants.size(); ++i) {
        CHECK(back.participants[i].impaired == ds.participants[i].impaired);
        CHECK(back.participants[i].tremor_amplitude == ds.participants[i].tremor_amplitude);
        CHECK(back.participants[i].electrode_gain == ds.participants[i].electrode_gain);
    }
    REQUIRE(back.samples.size() == ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& x = back.samples[i];
        const auto& y = ds.samples[i];
        CHECK(x.label == y.label);
        CHECK(x.participant == y.participant);
        CHECK(x.input.visual.frame == y.input.visual.frame);
        CHECK(x.input.accel.series == y.input.accel.series);
        CHECK(x.input.emg.series == y.input.emg.series);
        CHECK(x.input.emg.adjacency == y.input.emg.adjacency);
        CHECK(x.input.context.lighting == y.input.context.lighting);
        CHECK(x.input.context.fatigue == y.input.context.fatigue);
    }

    write_text(b.path() / kDatasetSamples, "short");
    CHECK_THROWS_AS(read_dataset(b.path()), IoError);
    CHECK_THROWS_AS(read_dataset(a.path() / "nowhere"), ConfigError);

    testing::TempDir c("ds-c");
    write_dataset(ds, split, c.path(), parts);
    write_text(c.path() / kDatasetManifest, "{ not json");
    CHECK_THROWS_AS(read_dataset(c.path()), IoError);
}

TEST_CASE("sha256 known vectors") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

}  // TEST_SUITE
