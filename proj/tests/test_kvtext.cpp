// Copyright (c) 2026 The ACN Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "acn/error.hpp"
#include "acn/kvtext.hpp"
#include "test_support.hpp"

using namespace acn;

TEST_CASE("round trip through serialize/parse") {
    KvDoc doc;
    doc.set("a.b.c", "hello world");
    doc.set_int("a.count", 42);
    doc.set_double("x.pi", 3.14159265358979312);
    doc.set_bool("x.flag", true);

    KvDoc back = KvDoc::parse(doc.serialize());
    CHECK(back.get("a.b.c") == "hello world");
    CHECK(back.get_int("a.count") == 42);
    CHECK(back.get_double("x.pi") == 3.14159265358979312);
    CHECK(back.get_bool("x.flag"));
}

TEST_CASE("doubles round-trip bitwise") {
    KvDoc doc;
    double vals[] = {1e-4, 0.1, 1.0 / 3.0, 6.737946999085467e-4, -0.0, 1e300};
    for (int i = 0; i < 6; ++i) doc.set_double("v" + std::to_string(i), vals[i]);
    KvDoc back = KvDoc::parse(doc.serialize());
    for (int i = 0; i < 6; ++i) CHECK(back.get_double("v" + std::to_string(i)) == vals[i]);
}

TEST_CASE("comments, blanks and whitespace are tolerated") {
    KvDoc doc = KvDoc::parse("# header\n\n  key.one =  7 \n# trailing\nkey.two = a b\n");
    CHECK(doc.get_int("key.one") == 7);
    CHECK(doc.get("key.two") == "a b");
}

TEST_CASE("canonical rendering is key-sorted") {
    KvDoc doc;
    doc.set("z.last", "1");
    doc.set("a.first", "2");
    std::string text = doc.serialize();
    CHECK(text.find("a.first") < text.find("z.last"));
}

TEST_CASE("errors: missing key, bad number, duplicate, malformed line") {
    KvDoc doc = KvDoc::parse("k = not_a_number\n");
    CHECK_THROWS_AS(doc.get("absent"), ConfigError);
    CHECK_THROWS_AS(doc.get_int("k"), ConfigError);
    CHECK_THROWS_AS(KvDoc::parse("dup = 1\ndup = 2\n"), ConfigError);
    CHECK_THROWS_AS(KvDoc::parse("no equals sign\n"), ConfigError);
    CHECK_THROWS_AS(doc.set("bad key!", "v"), ConfigError);
}

TEST_CASE("prefix listing") {
    KvDoc doc;
    doc.set("case.0.id", "a");
    doc.set("case.1.id", "b");
    doc.set("other", "c");
    auto keys = doc.keys_with_prefix("case.");
    REQUIRE(keys.size() == 2);
    CHECK(keys[0] == "case.0.id");
}

TEST_CASE("file save/load") {
    test::TempDir tmp("kv");
    KvDoc doc;
    doc.set("k.v", "1");
    doc.save(tmp.path() + "/t.kv");
    CHECK(KvDoc::load(tmp.path() + "/t.kv").get("k.v") == "1");
    CHECK_THROWS_AS(KvDoc::load(tmp.path() + "/absent.kv"), DataError);
}
