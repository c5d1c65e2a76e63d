/*
 * Copyright 2026 The DynRAG Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <random>

#include "dynrag/corpus.hpp"
#include "dynrag/error.hpp"
#include "dynrag/text.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace dynrag;
using dynrag::testing::TempDir;
using dynrag::testing::write_file;

namespace {

std::shared_ptr<Corpus> make_corpus(std::vector<Document> docs) {
    return std::make_shared<Corpus>(std::move(docs));
}

std::vector<std::string> ids(const std::vector<RetrievedDoc>& hits) {
    std::vector<std::string> out;
    for (const auto& h : hits) out.push_back(h.doc.id);
    return out;
}

}  // namespace

TEST(Text, TokenizeLowercasesAndSplits) {
    EXPECT_EQ(text::tokenize("Hello, World-42!"), (std::vector<std::string>{"hello", "world", "42"}));
    EXPECT_TRUE(text::tokenize("  ...  ").empty());
    // UTF-8 bytes stay inside the word
    EXPECT_EQ(text::tokenize("caf\xc3\xa9 au"), (std::vector<std::string>{"caf\xc3\xa9", "au"}));
}

TEST(Text, NormalizeAnswerDropsArticlesAndPunctuation) {
    EXPECT_EQ(text::normalize_answer("The  Eiffel Tower."), "eiffel tower");
    EXPECT_EQ(text::normalize_answer("an apple, a pear"), "apple pear");
    EXPECT_EQ(text::normalize_answer(""), "");
}

TEST(Text, ClipWhitespaceTokens) {
    EXPECT_EQ(text::clip_whitespace_tokens("a  b c d", 2), "a b");
    EXPECT_EQ(text::clip_whitespace_tokens("a  b", 5), "a  b");
    EXPECT_EQ(text::clip_whitespace_tokens("a b c", 0), "a b c");
}

TEST(Text, ContainsRun) {
    std::vector<std::string> hay{"it", "is", "paris", "france"};
    EXPECT_TRUE(text::contains_run(hay, {"paris", "france"}));
    EXPECT_FALSE(text::contains_run(hay, {"france", "paris"}));
    EXPECT_FALSE(text::contains_run(hay, {}));
}

TEST(Corpus, IngestCountsRecords) {
    TempDir dir;
    write_file(dir / "c.jsonl",
               "{\"id\":\"d1\",\"title\":\"A\",\"text\":\"x\"}\n"
               "{\"id\":\"d2\",\"title\":\"B\",\"text\":\"y\"}\n"
               "{\"id\":\"d3\",\"title\":\"C\",\"text\":\"z\"}\n");
    auto c = ingest_corpus(dir / "c.jsonl");
    EXPECT_EQ(c.size(), 3u);
    ASSERT_NE(c.find("d2"), nullptr);
    EXPECT_EQ(c.find("d2")->title, "B");
}

TEST(Corpus, EmptyFileGivesEmptyCorpus) {
    TempDir dir;
    write_file(dir / "c.jsonl", "");
    EXPECT_EQ(ingest_corpus(dir / "c.jsonl").size(), 0u);
}

TEST(Corpus, DuplicateIdNamesTheId) {
    TempDir dir;
    write_file(dir / "c.jsonl",
               "{\"id\":\"d1\",\"title\":\"A\",\"text\":\"x\"}\n"
               "{\"id\":\"d1\",\"title\":\"B\",\"text\":\"y\"}\n");
    try {
        ingest_corpus(dir / "c.jsonl");
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("\"d1\""), std::string::npos) << e.what();
    }
}

TEST(Corpus, MalformedLineReportsLineNumber) {
    TempDir dir;
    write_file(dir / "c.jsonl", "{\"id\":\"d1\",\"title\":\"A\",\"text\":\"x\"}\nnot json\n");
    try {
        ingest_corpus(dir / "c.jsonl");
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(Corpus, LoadDatasetLenientCollectsFailures) {
    TempDir dir;
    write_file(dir / "q.jsonl",
               "{\"id\":\"q1\",\"question\":\"who?\",\"answers\":[\"x\"]}\n"
               "{\"id\":\"q2\"}\n"
               "{\"id\":\"q3\",\"question\":\"why?\",\"answers\":[],\"task\":\"eli5\"}\n");
    auto load = load_dataset(dir / "q.jsonl", true);
    ASSERT_EQ(load.queries.size(), 2u);
    EXPECT_EQ(load.failures.size(), 1u);
    EXPECT_EQ(load.queries[1].task, Task::eli5);
    EXPECT_THROW(load_dataset(dir / "q.jsonl"), FormatError);
}

TEST(Bm25, SingleDocCounts) {
    auto idx = Bm25Index::build(make_corpus({{"d1", "", "a b a"}}));
    EXPECT_EQ(idx.document_frequency("a"), 1u);
    EXPECT_EQ(idx.term_frequency("a", "d1"), 2u);
    EXPECT_EQ(idx.term_frequency("b", "d1"), 1u);
}

TEST(Bm25, EmptyCorpusHasZeroAvgdl) {
    auto idx = Bm25Index::build(make_corpus({}));
    EXPECT_EQ(idx.avgdl(), 0.0);
    EXPECT_TRUE(idx.retrieve({"q", "anything", {}}, 5).empty());
}

TEST(Bm25, TitleIsIndexed) {
    auto idx = Bm25Index::build(make_corpus({{"d1", "x", ""}}));
    EXPECT_EQ(idx.document_frequency("x"), 1u);
    EXPECT_EQ(ids(idx.retrieve({"q", "x", {}}, 3)), std::vector<std::string>{"d1"});
}

TEST(Bm25, OnlyMatchingDocsReturned) {
    auto idx = Bm25Index::build(make_corpus({{"d1", "", "apple pie"}, {"d2", "", "banana split"}}));
    EXPECT_EQ(ids(idx.retrieve({"q", "apple", {}}, 5)), std::vector<std::string>{"d1"});
    EXPECT_TRUE(idx.retrieve({"q", "zzz", {}}, 5).empty());
}

TEST(Bm25, HandComputedScore) {
    // N=2, df(apple)=1 -> idf = ln(1 + 1.5/1.5) = ln 2; dl = avgdl = 2, tf = 1
    // -> score = ln2 * 2.2 / (1 + 1.2) = ln 2
    auto idx = Bm25Index::build(make_corpus({{"d1", "", "apple pie"}, {"d2", "", "banana split"}}));
    auto hits = idx.retrieve({"q", "apple", {}}, 5);
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_NEAR(hits[0].score, std::log(2.0), 1e-12);
    EXPECT_EQ(hits[0].rank, 1u);
}

TEST(Bm25, TiesBreakByAscendingId) {
    auto idx = Bm25Index::build(make_corpus({{"d3", "", "cat"}, {"d1", "", "cat"}, {"d2", "", "cat"}}));
    EXPECT_EQ(ids(idx.retrieve({"q", "cat", {}}, 3)), (std::vector<std::string>{"d1", "d2", "d3"}));
}

TEST(Bm25, RetrieveRejectsZeroN) {
    auto idx = Bm25Index::build(make_corpus({{"d1", "", "a"}}));
    EXPECT_THROW(idx.retrieve({"q", "a", {}}, 0), std::invalid_argument);
}

TEST(Bm25, MatchesNaiveOracleOnRandomCorpora) {
    std::mt19937 rng(7);
    const std::vector<std::string> vocab{"red", "blue", "green", "fox", "dog", "cat", "tree", "river",
                                         "stone", "wind", "moon", "sun", "rain", "sand", "iron"};
    auto word = [&] { return vocab[rng() % vocab.size()]; };
    for (int round = 0; round < 5; ++round) {
        std::vector<Document> docs;
        for (int i = 0; i < 60; ++i) {
            std::string body;
            for (std::size_t w = 0, n = 1 + rng() % 20; w < n; ++w) body += word() + " ";
            docs.push_back({"doc" + std::to_string(i), word(), body});
        }
        auto corpus = make_corpus(docs);
        auto idx = Bm25Index::build(corpus);
        for (int qn = 0; qn < 20; ++qn) {
            std::string q = word() + " " + word() + " " + word();
            auto got = idx.retrieve({"q", q, {}}, 10);
            auto want = oracle::bm25_rank(docs, q, 10);
            ASSERT_EQ(got.size(), want.size()) << q;
            for (std::size_t i = 0; i < got.size(); ++i) {
                EXPECT_EQ(got[i].doc.id, want[i].first) << q;
                EXPECT_EQ(got[i].score, want[i].second);
            }
        }
    }
}

TEST(Bm25, ResultIsPrefixOfLargerRetrieval) {
    std::mt19937 rng(11);
    std::vector<Document> docs;
    for (int i = 0; i < 40; ++i) docs.push_back({"d" + std::to_string(i), "", std::string(1, char('a' + rng() % 6)) + " x"});
    auto idx = Bm25Index::build(make_corpus(docs));
    Query q{"q", "a b c", {}};
    auto big = idx.retrieve(q, 40);
    for (std::size_t n = 1; n < 40; ++n) {
        auto small = idx.retrieve(q, n);
        ASSERT_LE(small.size(), n);
        for (std::size_t i = 0; i < small.size(); ++i) EXPECT_EQ(small[i].doc.id, big[i].doc.id);
    }
}

TEST(Bm25, Deterministic) {
    auto idx = Bm25Index::build(make_corpus({{"d1", "t", "a b"}, {"d2", "u", "b c"}, {"d3", "v", "a c"}}));
    auto a = idx.retrieve({"q", "a c", {}}, 3);
    auto b = idx.retrieve({"q", "a c", {}}, 3);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].doc.id, b[i].doc.id);
        EXPECT_EQ(a[i].score, b[i].score);
    }
}

TEST(Precomputed, OrdersByScoreThenId) {
    auto corpus = make_corpus({{"d1", "", ""}, {"d2", "", ""}, {"d3", "", ""}});
    ScoreTable t;
    t.set("q1", "d1", 0.5);
    t.set("q1", "d2", 0.9);
    t.set("q1", "d3", 0.5);
    PrecomputedRetriever r(corpus, t);
    EXPECT_EQ(ids(r.retrieve({"q1", "", {}}, 5)), (std::vector<std::string>{"d2", "d1", "d3"}));
    EXPECT_TRUE(r.retrieve({"q2", "", {}}, 5).empty());
}

TEST(ScoreTable, LoadsFile) {
    TempDir dir;
    write_file(dir / "s.jsonl", "{\"query_id\":\"q\",\"doc_id\":\"d\",\"score\":0.25}\n");
    auto t = ScoreTable::load(dir / "s.jsonl");
    EXPECT_EQ(t.get("q", "d"), 0.25);
    EXPECT_FALSE(t.get("q", "x").has_value());
}
