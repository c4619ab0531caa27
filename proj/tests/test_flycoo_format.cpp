#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <string>

#include "flycoo/error.hpp"
#include "flycoo/flycoo_tensor.hpp"
#include "flycoo/morton.hpp"
#include "flycoo/partition.hpp"
#include "flycoo/rng.hpp"
#include "flycoo/synth.hpp"
#include "helpers.hpp"

using namespace flycoo;

namespace {

// Interleaved bit string, most significant level first; at each level only
// modes with enough bits contribute, lower modes first.
std::string morton_bits(const std::vector<std::uint64_t>& c, const std::vector<unsigned>& widths) {
  unsigned top = 0;
  for (auto w : widths) top = std::max(top, w);
  std::string s;
  for (int level = static_cast<int>(top) - 1; level >= 0; --level)
    for (std::size_t m = 0; m < c.size(); ++m)
      if (static_cast<unsigned>(level) < widths[m]) s += ((c[m] >> level) & 1) ? '1' : '0';
  return s;
}

unsigned width_of(std::uint64_t extent) {
  unsigned w = 0;
  while ((std::uint64_t{1} << w) < extent) ++w;
  return w;
}

// Eq. 3 left-hand side evaluated from scratch.
long double demand_by_hand(const PartitionParams& p, std::size_t n, const std::vector<std::uint64_t>& ss_sizes) {
  long double shards = 0;
  for (auto s : ss_sizes) shards += static_cast<long double>((s + p.g - 1) / p.g);
  return (static_cast<long double>(p.alpha) * p.m[n] * p.rank + static_cast<long double>(p.beta) * p.g) * p.nu +
         static_cast<long double>(p.sigma) * shards;
}

std::vector<std::uint64_t> ss_sizes_by_hand(const CooTensor& t, std::size_t n, std::uint64_t m, std::uint64_t k) {
  std::vector<std::uint64_t> sizes(k, 0);
  for (std::size_t i = 0; i < t.nnz(); ++i) ++sizes[t.indices(i)[n] / m];
  return sizes;
}

// Expected element order for `mode`: super-shard, then Morton over interval
// coordinates, then the coordinates themselves.
std::vector<Element> expected_order(const CooTensor& t, const PartitionParams& p, std::size_t mode) {
  std::vector<unsigned> widths;
  for (std::size_t n = 0; n < t.num_modes(); ++n) widths.push_back(width_of(p.k[n]));
  struct Keyed {
    std::uint64_t ss;
    std::string morton;
    Element e;
  };
  std::vector<Keyed> keyed;
  for (std::size_t i = 0; i < t.nnz(); ++i) {
    std::vector<std::uint64_t> j;
    for (std::size_t n = 0; n < t.num_modes(); ++n) j.push_back(t.indices(i)[n] / p.m[n]);
    keyed.push_back({j[mode], morton_bits(j, widths), t.element(i)});
  }
  std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    if (a.ss != b.ss) return a.ss < b.ss;
    if (a.morton != b.morton) return a.morton < b.morton;
    return a.e.indices < b.e.indices;
  });
  std::vector<Element> out;
  for (auto& k : keyed) out.push_back(std::move(k.e));
  return out;
}

std::vector<std::uint64_t> fills_of(const ModePlan& mp) {
  std::vector<std::uint64_t> out;
  for (std::size_t s = 0; s < mp.shards(); ++s) out.push_back(mp.shard_size(s));
  return out;
}

}  // namespace

TEST_SUITE("morton") {
  TEST_CASE("hand examples") {
    CHECK(morton::bit_width_for(1) == 0);
    CHECK(morton::bit_width_for(2) == 1);
    CHECK(morton::bit_width_for(4) == 2);
    CHECK(morton::bit_width_for(5) == 3);
    const unsigned w22[] = {2, 2};
    const std::uint32_t a[] = {1, 2};
    CHECK(morton::encode<std::uint32_t>(a, w22) == 0b0110);
    const unsigned w13[] = {1, 3};
    const std::uint32_t b[] = {1, 5};
    CHECK(morton::encode<std::uint32_t>(b, w13) == 0b1011);
    const unsigned wide[] = {33, 32};
    CHECK_THROWS(morton::encode<std::uint32_t>(a, wide));
  }

  TEST_CASE("comparison agrees with the bit-string oracle") {
    CounterRng rng(4);
    for (int trial = 0; trial < 20000; ++trial) {
      const std::size_t n = 2 + rng.below(4);
      std::vector<unsigned> widths;
      std::vector<std::uint64_t> x, y;
      for (std::size_t m = 0; m < n; ++m) {
        widths.push_back(static_cast<unsigned>(rng.below(9)));
        const std::uint64_t lim = std::uint64_t{1} << widths.back();
        x.push_back(rng.below(lim));
        y.push_back(trial % 5 == 0 ? x.back() : rng.below(lim));
      }
      const std::vector<std::uint32_t> xs(x.begin(), x.end()), ys(y.begin(), y.end());
      const auto bx = morton_bits(x, widths), by = morton_bits(y, widths);
      CHECK(morton::less<std::uint32_t>(xs, ys) == (bx < by));
      CHECK(morton::encode<std::uint32_t>(xs, widths) == std::stoull("0" + bx, nullptr, 2));
    }
  }
}

TEST_SUITE("element records") {
  TEST_CASE("layout sizes") {
    CHECK(RecordLayout{3}.bytes() == 48);
    CHECK(RecordLayout{4}.bytes() == 56);
    CHECK(RecordLayout{5}.bytes() == 72);
    CHECK(record_bytes(3) == 48);
  }

  TEST_CASE("fields round trip without interference") {
    ElementBuffer buf(5, 3);
    buf.set_value(1, -2.5);
    for (std::size_t m = 0; m < 5; ++m) {
      buf.set_index(1, m, 0xfffffff0u + static_cast<index_t>(m));
      buf.set_shard(1, m, 0x80000000u + static_cast<std::uint32_t>(m));
      buf.set_rank(1, m, 0xabcd0000u + static_cast<std::uint32_t>(m));
    }
    auto v = buf.view(1);
    for (std::size_t m = 0; m < 5; ++m) {
      CHECK(v.index(m) == 0xfffffff0u + m);
      CHECK(v.shard(m) == 0x80000000u + m);
      CHECK(v.rank(m) == 0xabcd0000u + m);
    }
    CHECK(v.value() == -2.5);
    CHECK(buf.decode(0) == FlycooElement{{0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}, 0.0});
    buf.copy_record(2, buf, 1);
    CHECK(buf.decode(2) == buf.decode(1));
  }

  TEST_CASE("allocations are tracked") {
    const auto before = ElementAllocationStats::live_bytes.load();
    {
      ElementBuffer buf(3, 100);
      CHECK(ElementAllocationStats::live_bytes.load() - before == 4800);
    }
    CHECK(ElementAllocationStats::live_bytes.load() == before);
  }
}

TEST_SUITE("partition parameters") {
  TEST_CASE("interval count is a multiple of the thread count") {
    CacheModel cache;
    cache.threads = 4;
    cache.cache_bytes = 1ull << 40;
    cache.g_min = cache.g_max = 4;
    std::vector<index_t> dims{8};
    auto p = select_params(dims, 8, 1, cache);
    CHECK(p.m[0] == 2);
    CHECK(p.k[0] == 4);
  }

  TEST_CASE("short modes get one index per interval") {
    CacheModel cache;
    cache.threads = 128;
    cache.cache_bytes = 1ull << 40;
    std::vector<index_t> dims{100, 1000};
    auto p = select_params(dims, 5000, 8, cache);
    CHECK(p.m[0] == 1);
    CHECK(p.k[0] == 100);
    CHECK(interval_count_ok(p, dims, 0));
    CHECK(p.k[1] % 128 == 0);
  }

  TEST_CASE("cube example by direct substitution") {
    // 4096^3, 10^6 nonzeros, nu = 8, Gamma = 32 MiB, R = 16, alpha = 16 R,
    // beta = 40, sigma = 8, theta = 0.5.
    CacheModel cache;
    cache.threads = 8;
    cache.cache_bytes = 32ull << 20;
    cache.theta = 0.5;
    cache.alpha = 16 * 16;
    cache.beta = 40;
    cache.sigma = 8;
    std::vector<index_t> dims{4096, 4096, 4096};
    const std::uint64_t nnz = 1000000;
    auto p = select_params(dims, nnz, 16, cache);
    const long double budget = 0.5L * (32 << 20);
    for (std::size_t n = 0; n < 3; ++n) {
      const std::uint64_t k = (4096 + p.m[n] - 1) / p.m[n];
      CHECK(k % 8 == 0);
      CHECK(p.k[n] == k);
      // Worst case shard count: every super-shard contributes one partial shard.
      const long double shards = std::ceil(static_cast<long double>(nnz) / p.g) + static_cast<long double>(k);
      const long double lhs = (256.0L * p.m[n] * 16 + 40.0L * p.g) * 8 + 8 * shards;
      CHECK(lhs <= budget);
    }
    // Hand-evaluated: m = 512 overflows at g = 1024 (17,112,776 > 16,777,216),
    // m = 256 fits; then g = 32768 overflows and g = 16384 fits (13,632,112).
    CHECK(p.m == std::vector<index_t>{256, 256, 256});
    CHECK(p.g == 16384);
  }

  TEST_CASE("Eq. 2 and Eq. 3 hold after building, on random shapes") {
    CounterRng rng(77);
    for (int trial = 0; trial < 40; ++trial) {
      std::vector<index_t> dims;
      const std::size_t n_modes = 3 + rng.below(2);
      for (std::size_t n = 0; n < n_modes; ++n) dims.push_back(static_cast<index_t>(1 + rng.below(300)));
      double space = 1;
      for (auto d : dims) space *= d;
      const auto nnz = static_cast<std::size_t>(std::min(space * 0.3, 1.0 + static_cast<double>(rng.below(4000))));
      auto t = synth_tensor(dims, std::max<std::size_t>(nnz, 1), {static_cast<std::uint64_t>(trial), 0.5});
      CacheModel cache;
      cache.threads = 1 + rng.below(8);
      cache.cache_bytes = 64 * 1024 + rng.below(1 << 20);
      cache.g_min = 4;
      cache.g_max = 1024;
      cache.m_max = 1 + rng.below(200);
      const std::size_t rank = 1 + rng.below(16);
      PartitionParams p;
      try {
        p = select_params(dims, t.nnz(), rank, cache);
      } catch (const InfeasibleError&) {
        continue;
      }
      auto f = build_flycoo(t, p);
      for (std::size_t n = 0; n < n_modes; ++n) {
        CAPTURE(trial);
        CAPTURE(n);
        if (dims[n] >= cache.threads) {
          CHECK(p.k[n] % cache.threads == 0);
          CHECK(p.m[n] == (dims[n] + p.k[n] - 1) / p.k[n]);
        } else {
          CHECK(p.m[n] == 1);
        }
        CHECK(p.m[n] <= dims[n]);
        const auto sizes = ss_sizes_by_hand(t, n, p.m[n], p.k[n]);
        CHECK(demand_by_hand(p, n, sizes) <= 0.5L * cache.cache_bytes);
      }
      CHECK(validate_plan(f).passed());
    }
  }

  TEST_CASE("infeasible requests name the binding mode") {
    CacheModel cache;
    cache.threads = 4;
    cache.cache_bytes = 4096;
    std::vector<index_t> dims{1000, 1000, 1000};
    try {
      select_params(dims, 10000, 16, cache);
      FAIL("expected infeasible");
    } catch (const InfeasibleError& e) {
      CHECK(std::string(e.what()).find("mode 0") != std::string::npos);
    }
    cache.cache_bytes = 1 << 30;
    cache.g_min = 3000;
    cache.g_max = 4000;  // no power of two in range
    CHECK_THROWS_AS(select_params(dims, 10000, 16, cache), InfeasibleError);
  }

  TEST_CASE("argument checks") {
    std::vector<index_t> dims{10, 10};
    CacheModel cache;
    cache.threads = 0;
    CHECK_THROWS_AS(select_params(dims, 10, 1, cache), Error);
    cache.threads = 1;
    CHECK_THROWS_AS(select_params(dims, 10, 0, cache), Error);
    cache.theta = 1.0;
    CHECK_THROWS_AS(select_params(dims, 10, 1, cache), Error);
    CHECK_THROWS_AS(manual_params(dims, {2}, 4), Error);
    CHECK_THROWS_AS(manual_params(dims, {2, 0}, 4), Error);
    CHECK_THROWS_AS(manual_params(dims, {2, 2}, 0), Error);
    auto p = manual_params(dims, {3, 10}, 4);
    CHECK(p.k == std::vector<std::uint64_t>{4, 1});
  }

  TEST_CASE("element size formula") {
    std::vector<index_t> cube{1024, 1024, 1024};
    auto p = manual_params(cube, {1, 1, 1}, 1024);
    CHECK(element_size_bits(p, cube, 1 << 20) == 124);
    p.g = 1 << 20;
    CHECK(element_size_bits(p, cube, 1 << 20) == 3 * 10 + 64);
    p.g = 1 << 22;
    CHECK(element_size_bits(p, cube, 1 << 20) == 3 * 10 + 64);

    // Delicious-shaped: 532.9K x 17.3M x 2.5M x 1.4K, 140.1M nonzeros, g = 2^15.
    std::vector<index_t> dims{532900, 17300000, 2500000, 1400};
    const std::uint64_t nnz = 140100000;
    auto q = manual_params(dims, {1, 1, 1, 1}, 1 << 15);
    double expected = 4 * std::ceil(std::log2(std::ceil(static_cast<double>(nnz) / (1 << 15))));
    for (auto d : dims) expected += std::ceil(std::log2(static_cast<double>(d)));
    expected += 64;
    CHECK(element_size_bits(q, dims, nnz) == static_cast<std::uint64_t>(expected));
    CHECK(ceil_log2(1) == 0);
    CHECK(ceil_log2(2) == 1);
    CHECK(ceil_log2(1025) == 11);
  }
}

TEST_SUITE("build") {
  TEST_CASE("single nonzero") {
    auto t = CooTensor::from_elements({9, 7, 5}, {{{4, 3, 2}, 1.0}});
    auto f = build_flycoo(t, manual_params(t.dims(), {2, 2, 2}, 4));
    CHECK(f.active_mode() == 0);
    for (const auto& mp : f.plan().modes) CHECK(mp.shards() == 1);
    CHECK(f.active().decode(0) == FlycooElement{{0, 0, 0}, {4, 3, 2}, 1.0});
    CHECK(validate_plan(f).passed());
  }

  TEST_CASE("ceiling shard cut") {
    std::vector<Element> elems;
    for (index_t i = 0; i < 10; ++i) elems.push_back({{0, i}, 1.0 + i});
    auto t = CooTensor::from_elements({1, 10}, elems);
    auto f = build_flycoo(t, manual_params(t.dims(), {1, 10}, 4));
    const auto& mp = f.plan().modes[0];
    CHECK(mp.super_shards() == 1);
    CHECK(mp.shard_counts() == std::vector<std::uint64_t>{3});
    CHECK(fills_of(mp) == std::vector<std::uint64_t>{4, 4, 2});
    CHECK(f.plan().pointer_entries() == 1 + 1 + 3 + 3);
  }

  TEST_CASE("storage is two copies of the tensor") {
    auto t = testing::random_tensor({20, 30, 40}, 500, 2);
    const auto before = ElementAllocationStats::live_bytes.load();
    {
      auto f = build_flycoo(t, manual_params(t.dims(), {3, 4, 5}, 8));
      CHECK(f.buffer_bytes() == 2 * 500 * 48);
      CHECK(ElementAllocationStats::live_bytes.load() - before == 2 * 500 * 48);
    }
    CHECK(ElementAllocationStats::live_bytes.load() == before);
  }

  TEST_CASE("independent grouping of a 50^3 tensor") {
    auto t = synth_tensor(std::vector<index_t>{50, 50, 50}, 10000, {5, 0.7});
    const std::vector<index_t> m{7, 10, 13};
    const std::uint64_t g = 16;
    auto p = manual_params(t.dims(), m, g);
    auto f = build_flycoo(t, p);
    auto elems = f.active_elements();
    for (std::size_t n = 0; n < 3; ++n) {
      CAPTURE(n);
      // Plan shard fills, from super-shard sizes counted here.
      std::vector<std::uint64_t> fills;
      for (auto s : ss_sizes_by_hand(t, n, m[n], p.k[n])) {
        for (std::uint64_t left = s; left > 0; left -= std::min(left, g)) fills.push_back(std::min(left, g));
      }
      CHECK(fills_of(f.plan().modes[n]) == fills);

      // Group the decoded elements by shard id.
      std::map<std::uint32_t, std::uint64_t> groups;
      for (const auto& e : elems) ++groups[e.shard_ids[n]];
      std::vector<std::uint64_t> sizes;
      for (const auto& [s, c] : groups) sizes.push_back(c);
      CHECK(sizes == fills);

      // Each shard id belongs to the super-shard of the element's index.
      std::vector<std::uint32_t> first_shard{0};
      for (auto s : ss_sizes_by_hand(t, n, m[n], p.k[n])) first_shard.push_back(first_shard.back() + static_cast<std::uint32_t>((s + g - 1) / g));
      for (const auto& e : elems) {
        const auto j = e.indices[n] / m[n];
        CHECK(e.shard_ids[n] >= first_shard[j]);
        CHECK(e.shard_ids[n] < first_shard[j + 1]);
      }
    }
    CHECK(validate_plan(f).passed());
  }

  TEST_CASE("active buffer follows super-shard, Morton, coordinate order") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      auto t = testing::random_tensor({23, 17, 31}, 400, seed);
      auto p = manual_params(t.dims(), {3, 2, 5}, 8);
      auto f = build_flycoo(t, p);
      auto want = expected_order(t, p, 0);
      auto got = f.active_elements();
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].indices == want[i].indices);
        CHECK(got[i].value == want[i].value);
      }
      // Stored ranks give every mode's order: the element at rank r of
      // shard s is the (offset(s) + r)-th of that mode's expected order.
      const auto& buf = f.active();
      for (std::size_t n = 1; n < 3; ++n) {
        auto order = expected_order(t, p, n);
        const auto& mp = f.plan().modes[n];
        for (std::size_t e = 0; e < buf.size(); ++e) {
          auto v = buf.view(e);
          const auto pos = mp.shard_offset[v.shard(n)] + v.rank(n);
          CHECK(order[pos].indices == buf.decode(e).indices);
        }
      }
    }
  }

  TEST_CASE("four and five mode tensors validate") {
    auto t4 = testing::random_tensor({6, 7, 8, 9}, 300, 1);
    CHECK(validate_plan(build_flycoo(t4, manual_params(t4.dims(), {2, 3, 1, 4}, 5))).passed());
    auto t5 = testing::random_tensor({4, 5, 6, 3, 7}, 300, 2);
    CHECK(validate_plan(build_flycoo(t5, manual_params(t5.dims(), {1, 2, 3, 3, 7}, 3))).passed());
  }

  TEST_CASE("timings are reported") {
    auto t = testing::random_tensor({30, 30, 30}, 1000, 1);
    BuildTimings timings;
    build_flycoo(t, manual_params(t.dims(), {4, 4, 4}, 16), &timings);
    CHECK(timings.super_shards_s >= 0);
    CHECK(timings.morton_order_s >= 0);
    CHECK(timings.shards_s >= 0);
  }
}

TEST_SUITE("validation") {
  TEST_CASE("fresh tensors pass every check") {
    auto t = testing::random_tensor({40, 30, 20}, 2000, 3);
    auto report = validate_plan(build_flycoo(t, manual_params(t.dims(), {5, 5, 5}, 16)));
    CHECK(report.passed());
    for (const char* name : {"super_shard_conservation", "shard_offsets_increasing", "shard_fill",
                             "storage_2x_nnz", "interval_containment", "active_order",
                             "offsets_match_membership", "slot_ranks", "interval_count", "cache_fit"})
      CHECK(report.find(name) != nullptr);
    CHECK(report.find("interval_count")->detail.find("not applicable") != std::string::npos);

    CacheModel cache;
    cache.threads = 2;
    cache.g_min = 8;
    auto solved = build_flycoo(t, select_params(t.dims(), t.nnz(), 4, cache));
    auto r2 = validate_plan(solved);
    CHECK(r2.passed());
    CHECK(r2.find("cache_fit")->detail.empty());
  }

  TEST_CASE("a corrupted shard id is reported with its element") {
    auto t = testing::random_tensor({40, 30, 20}, 2000, 3);
    auto f = build_flycoo(t, manual_params(t.dims(), {5, 5, 5}, 16));
    const auto& mp = f.plan().modes[1];
    const auto original = f.active().view(17).shard(1);
    // Move it to a shard of a different super-shard.
    const auto wrong = (original + mp.shards() / 2) % static_cast<std::uint32_t>(mp.shards());
    REQUIRE(mp.super_shard_of(wrong) != mp.super_shard_of(original));
    f.corrupt_shard_id(17, 1, wrong);
    auto report = validate_plan(f);
    CHECK_FALSE(report.passed());
    const auto* c = report.find("interval_containment");
    REQUIRE(c != nullptr);
    CHECK_FALSE(c->passed);
    CHECK(c->detail.find("element 17") != std::string::npos);
  }

  TEST_CASE("offsets recomputed from membership match the plan") {
    auto t = synth_tensor(std::vector<index_t>{60, 70, 80}, 5000, {2, 1.0});
    auto f = build_flycoo(t, manual_params(t.dims(), {6, 7, 8}, 32));
    for (std::size_t n = 0; n < 3; ++n) {
      // Independent prefix sum over shard-id counts.
      std::vector<std::uint64_t> counts(f.plan().modes[n].shards(), 0);
      for (std::size_t e = 0; e < f.active().size(); ++e) ++counts[f.active().view(e).shard(n)];
      std::vector<std::uint64_t> offsets;
      std::uint64_t run = 0;
      for (auto c : counts) {
        offsets.push_back(run);
        run += c;
      }
      CHECK(offsets == f.plan().modes[n].shard_offset);
      CHECK(recompute_shard_offsets(f, n) == f.plan().modes[n].shard_offset);
    }
  }
}
