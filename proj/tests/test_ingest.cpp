#include "perfspec/ingest.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

using namespace perfspec;

namespace {

RunRecord sample_record() {
    RunRecord r;
    r.label = "cg1";
    r.dofs = 9261;
    r.wall_time = 0.05;
    r.flops = 1000;
    r.workers = 1;
    return r;
}

RunRecord full_record() {
    RunRecord r;
    r.label = "cg1, \"quoted\"";
    r.dofs = 68'921;
    r.wall_time = 1.0 / 3.0;
    r.flops = 123'456'789'012;
    r.workers = 3;
    r.linear_iterations = 81;
    r.nonlinear_iterations = 2;
    r.h_size = 0.025;
    r.l2_error = 7.77e-3;
    r.alpha = 1000;
    r.discretization = Discretization::CG2;
    r.cache_counters = {{CacheLevel::L1, 500, 128}, {CacheLevel::L2, 40, 128}, {CacheLevel::L3, 3, 128}};
    return r;
}

} // namespace

TEST(ParseRecords, JsonExample) {
    const auto doc = parse_records(R"({"label":"cg1","dofs":9261,"wall_time_s":0.05,"flops":1000,"workers":1})",
                                   RecordFormat::JsonLines);
    ASSERT_EQ(doc.records.size(), 1u);
    EXPECT_EQ(doc.records[0], sample_record());
    EXPECT_TRUE(doc.warnings.empty());
}

TEST(ParseRecords, CsvExample) {
    const auto doc = parse_records("label,dofs,wall_time_s,flops,workers\ncg1,9261,0.05,1000,1\n", RecordFormat::Csv);
    ASSERT_EQ(doc.records.size(), 1u);
    EXPECT_EQ(doc.records[0], sample_record());
}

TEST(ParseRecords, NegativeDofsRejected) {
    try {
        (void)parse_records(R"({"dofs":-3})", RecordFormat::JsonLines);
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 1u);
        EXPECT_EQ(e.reason(), "dofs must be ≥ 1");
    }
}

TEST(ParseRecords, UnknownKeysIgnoredAndOptionalsAbsent) {
    const auto doc =
        parse_records(R"({"dofs":8,"wall_time_s":1,"colour":"blue","nested":{"a":1}})", RecordFormat::JsonLines);
    ASSERT_EQ(doc.records.size(), 1u);
    const auto& r = doc.records[0];
    EXPECT_EQ(r.label, "");
    EXPECT_EQ(r.flops, 0u);
    EXPECT_EQ(r.workers, 1u);
    EXPECT_FALSE(r.linear_iterations);
    EXPECT_FALSE(r.h_size);
    EXPECT_TRUE(r.cache_counters.empty());
    EXPECT_EQ(r.discretization, Discretization::CG1);
}

TEST(ParseRecords, MissesDefaultToSixtyFourByteLines) {
    const auto doc = parse_records(R"({"dofs":8,"wall_time_s":1,"l1_misses":10,"l3_misses":2})",
                                   RecordFormat::JsonLines);
    const auto& r = doc.records.at(0);
    ASSERT_EQ(r.cache_counters.size(), 2u);
    EXPECT_EQ(r.counters(CacheLevel::L1)->misses, 10u);
    EXPECT_EQ(r.counters(CacheLevel::L1)->line_size, 64u);
    EXPECT_EQ(r.counters(CacheLevel::L3)->misses, 2u);
    EXPECT_EQ(r.counters(CacheLevel::L2), nullptr);
}

TEST(ParseRecords, BadLineSize) {
    try {
        (void)parse_records("\n" R"({"dofs":8,"wall_time_s":1,"l1_misses":1,"line_size_bytes":48})",
                            RecordFormat::JsonLines);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
        EXPECT_EQ(e.reason(), "line_size must be a power of two in {32,64,128,256}");
    }
}

TEST(ParseRecords, ErrorReasons) {
    auto reason = [](std::string_view text, RecordFormat f = RecordFormat::JsonLines) {
        try {
            (void)parse_records(text, f);
        } catch (const ParseError& e) {
            return e.reason();
        }
        return std::string("no error");
    };
    EXPECT_EQ(reason("{not json"), "invalid JSON");
    EXPECT_EQ(reason("[1,2]"), "expected a JSON object");
    EXPECT_EQ(reason(R"({"dofs":5})"), "wall_time_s is required");
    EXPECT_EQ(reason(R"({"dofs":5,"wall_time_s":0})"), "wall_time must be > 0");
    EXPECT_EQ(reason(R"({"dofs":5,"wall_time_s":1,"workers":0})"), "workers must be ≥ 1");
    EXPECT_EQ(reason(R"({"dofs":5,"wall_time_s":1,"discretization":"Q1"})").substr(0, 14), "discretization");
    EXPECT_EQ(reason(R"({"dofs":"many","wall_time_s":1})"), "dofs must be an integer");
    EXPECT_EQ(reason("dofs,wall_time_s\n5\n", RecordFormat::Csv), "expected 2 fields, got 1");
    EXPECT_EQ(reason("dofs,wall_time_s\n5,abc\n", RecordFormat::Csv), "wall_time_s must be a number, got 'abc'");
}

TEST(ParseRecords, StrictFailsWholeParseLenientSkips) {
    const std::string text = R"({"dofs":1,"wall_time_s":1}
{"dofs":0,"wall_time_s":1}

garbage
{"dofs":2,"wall_time_s":1}
)";
    EXPECT_THROW((void)parse_records(text, RecordFormat::JsonLines), ParseError);
    const auto doc = parse_records(text, RecordFormat::JsonLines, ParseMode::Lenient);
    ASSERT_EQ(doc.records.size(), 2u);
    ASSERT_EQ(doc.warnings.size(), 2u);
    EXPECT_EQ(doc.warnings[0].line, 2u);
    EXPECT_EQ(doc.warnings[1].line, 4u);
    EXPECT_EQ(doc.warnings[1].reason, "invalid JSON");
}

TEST(ParseRecords, LenientCountsProperty) {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const int total = 1 + static_cast<int>(rng() % 30);
        int bad = 0;
        std::string json;
        std::string csv = "label,dofs,wall_time_s\n";
        for (int i = 0; i < total; ++i) {
            if (rng() % 3 == 0) {
                ++bad;
                json += R"({"dofs":0,"wall_time_s":1})" "\n";
                csv += "x,-1,1\n";
            } else {
                json += R"({"dofs":4,"wall_time_s":0.5})" "\n";
                csv += "x,4,0.5\n";
            }
        }
        for (auto [text, fmt] : {std::pair{json, RecordFormat::JsonLines}, std::pair{csv, RecordFormat::Csv}}) {
            const auto doc = parse_records(text, fmt, ParseMode::Lenient);
            EXPECT_EQ(static_cast<int>(doc.records.size()), total - bad);
            EXPECT_EQ(static_cast<int>(doc.warnings.size()), bad);
        }
    }
}

TEST(ParseRecords, CsvQuotingAndLineNumbers) {
    const std::string text = "label,dofs,wall_time_s\n\"a,b\",1,1\n\"multi\nline\",2,2\nbad,0,1\n";
    const auto doc = parse_records(text, RecordFormat::Csv, ParseMode::Lenient);
    ASSERT_EQ(doc.records.size(), 2u);
    EXPECT_EQ(doc.records[0].label, "a,b");
    EXPECT_EQ(doc.records[1].label, "multi\nline");
    ASSERT_EQ(doc.warnings.size(), 1u);
    EXPECT_EQ(doc.warnings[0].line, 5u);
}

TEST(ParseRecords, StreamOverload) {
    std::istringstream in("label,dofs,wall_time_s,flops,workers\r\ncg1,9261,0.05,1000,1\r\n");
    const auto doc = parse_records(in, RecordFormat::Csv);
    ASSERT_EQ(doc.records.size(), 1u);
    EXPECT_EQ(doc.records[0], sample_record());
}

TEST(ParseRecords, FormatNames) {
    EXPECT_EQ(parse_record_format("json-lines"), RecordFormat::JsonLines);
    EXPECT_EQ(parse_record_format("csv"), RecordFormat::Csv);
    EXPECT_FALSE(parse_record_format("xml"));
    EXPECT_EQ(record_format_for_path("runs.csv"), RecordFormat::Csv);
    EXPECT_EQ(record_format_for_path("runs.jsonl"), RecordFormat::JsonLines);
}

TEST(RoundTrip, BothFormats) {
    std::vector<RunRecord> records{sample_record(), full_record()};
    RunRecord odd = sample_record();
    odd.wall_time = 0.1 + 0.2;
    odd.h_size = 1.0 / 7.0;
    odd.l2_error = 0.0;
    records.push_back(odd);

    for (auto fmt : {RecordFormat::JsonLines, RecordFormat::Csv}) {
        const auto first = parse_records(serialize_records(records, fmt), fmt).records;
        ASSERT_EQ(first.size(), records.size());
        for (std::size_t i = 0; i < records.size(); ++i) EXPECT_EQ(first[i], records[i]) << to_string(fmt) << i;
        const auto second = parse_records(serialize_records(first, fmt), fmt).records;
        EXPECT_EQ(second, first);
    }
}

TEST(Serialize, CsvUsesDecimalHSize) {
    RunRecord r = sample_record();
    r.h_size = 0.05;
    const auto csv = serialize_records(std::span(&r, 1), RecordFormat::Csv);
    EXPECT_NE(csv.find(",0.05,"), std::string::npos);
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "label,dofs,wall_time_s,flops,workers,linear_iterations,nonlinear_iterations,h_size,l2_error,alpha,"
              "discretization,l1_misses,l2_misses,l3_misses,line_size_bytes");
}

TEST(Validate, Examples) {
    EXPECT_TRUE(validate_record(sample_record()).empty());
    auto r = sample_record();
    r.wall_time = 0;
    EXPECT_EQ(validate_record(r), std::vector<std::string>{"wall_time must be > 0"});
    r = sample_record();
    r.cache_counters = {{CacheLevel::L1, 5, 48}};
    EXPECT_EQ(validate_record(r), std::vector<std::string>{"line_size must be a power of two in {32,64,128,256}"});
    r = sample_record();
    r.cache_counters = {{CacheLevel::L2, 5, 64}, {CacheLevel::L2, 6, 64}};
    EXPECT_EQ(validate_record(r), std::vector<std::string>{"duplicate cache counters for L2"});
    r = sample_record();
    r.dofs = 0;
    r.workers = 0;
    EXPECT_EQ(validate_record(r).size(), 2u);
}

TEST(Merge, SingleRecordIdentity) {
    const auto r = full_record();
    auto merged = merge_worker_records(std::span(&r, 1));
    auto expected = r;
    expected.workers = 1;
    EXPECT_EQ(merged, expected);
}

TEST(Merge, SumsAndMax) {
    auto a = sample_record();
    a.flops = 100;
    a.wall_time = 2.0;
    const std::vector<RunRecord> two{a, a};
    const auto m = merge_worker_records(two);
    EXPECT_EQ(m.flops, 200u);
    EXPECT_DOUBLE_EQ(m.wall_time, 2.0);
    EXPECT_EQ(m.workers, 2u);
}

TEST(Merge, Mismatches) {
    auto a = sample_record();
    auto b = sample_record();
    a.dofs = 100;
    b.dofs = 200;
    EXPECT_THROW((void)merge_worker_records(std::vector{a, b}), MergeError);
    b = a;
    b.discretization = Discretization::DG1;
    EXPECT_THROW((void)merge_worker_records(std::vector{a, b}), MergeError);
    b = a;
    a.linear_iterations = 10;
    b.linear_iterations = 11;
    EXPECT_THROW((void)merge_worker_records(std::vector{a, b}), MergeError);
    EXPECT_THROW((void)merge_worker_records(std::vector<RunRecord>{}), MergeError);
}

TEST(Merge, PermutationInvariant) {
    std::mt19937 rng(5);
    std::vector<RunRecord> parts;
    for (int i = 0; i < 6; ++i) {
        auto r = full_record();
        r.label = "rank" + std::to_string(rng() % 100);
        r.wall_time = 1.0 + (rng() % 1000) / 100.0;
        r.flops = rng() % 100000;
        r.l2_error = (rng() % 50) * 1e-4;
        r.workers = 1;
        for (auto& c : r.cache_counters) c.misses = rng() % 5000;
        if (i == 3) r.cache_counters.pop_back();
        parts.push_back(r);
    }
    const auto reference = merge_worker_records(parts);
    EXPECT_EQ(reference.workers, 6u);
    std::uint64_t l1 = 0;
    for (const auto& p : parts) l1 += p.counters(CacheLevel::L1)->misses;
    EXPECT_EQ(reference.counters(CacheLevel::L1)->misses, l1);
    for (int k = 0; k < 20; ++k) {
        std::shuffle(parts.begin(), parts.end(), rng);
        EXPECT_EQ(merge_worker_records(parts), reference);
    }
}
