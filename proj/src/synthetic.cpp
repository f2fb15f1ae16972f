#include "mmtm/synthetic.hpp"

#include <array>
#include <functional>

namespace mmtm {
namespace {

struct Person {
  const char* name;
  const char* pronoun;
};

constexpr std::array<Person, 8> kPeople = {{{"john", "he"},
                                            {"mary", "she"},
                                            {"ravi", "he"},
                                            {"lena", "she"},
                                            {"omar", "he"},
                                            {"sara", "she"},
                                            {"tom", "he"},
                                            {"nina", "she"}}};
constexpr std::array<const char*, 8> kItems = {"apples", "pencils", "stickers", "marbles",
                                               "cookies", "books",   "shells",   "cards"};

struct Draw {
  Rng& rng;
  std::int64_t operator()(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  }
};

struct Slots {
  std::string name;
  std::string pronoun;
  std::string item;
  std::string friend_name;
};

std::string num(std::int64_t v) { return std::to_string(v); }

// Each template fills a record from slots and fresh distinct quantities.
using Template = std::function<RawRecord(const Slots&, Draw&)>;

const std::vector<Template>& templates() {
  static const std::vector<Template> kTemplates = {
      [](const Slots& s, Draw& d) {
        auto a = d(2, 40), b = d(41, 90);
        return RawRecord{"", s.name + " has " + num(a) + " " + s.item + " . " + s.pronoun + " buys " + num(b) +
                                 " more " + s.item + " . how many " + s.item + " does " + s.pronoun + " have now ?",
                         num(a) + " + " + num(b), Rational(a + b)};
      },
      [](const Slots& s, Draw& d) {
        auto b = d(2, 30), a = b + d(1, 60);
        return RawRecord{"", s.name + " had " + num(a) + " " + s.item + " . " + s.pronoun + " gave " + num(b) + " " +
                                 s.item + " to a friend . how many " + s.item + " are left ?",
                         num(a) + " - " + num(b), Rational(a - b)};
      },
      [](const Slots& s, Draw& d) {
        auto a = d(2, 12), b = d(13, 25);
        return RawRecord{"", s.name + " has " + num(a) + " boxes with " + num(b) + " " + s.item +
                                 " in each box . how many " + s.item + " does " + s.pronoun + " have in total ?",
                         num(a) + " * " + num(b), Rational(a * b)};
      },
      [](const Slots& s, Draw& d) {
        auto b = d(2, 9), k = d(10, 20);
        return RawRecord{"", s.name + " shares " + num(b * k) + " " + s.item + " equally among " + num(b) +
                                 " friends . how many " + s.item + " does each friend get ?",
                         num(b * k) + " / " + num(b), Rational(k)};
      },
      [](const Slots& s, Draw& d) {
        auto a = d(2, 9), b = d(10, 19), c = d(20, 40);
        return RawRecord{"", s.name + " has " + num(a) + " " + s.item + " and buys " + num(b) + " bags with " +
                                 num(c) + " " + s.item + " in each bag . how many " + s.item + " does " + s.pronoun +
                                 " have altogether ?",
                         num(a) + " + " + num(b) + " * " + num(c), Rational(a + b * c)};
      },
      [](const Slots& s, Draw& d) {
        auto a = d(3, 9), b = d(10, 15), c = d(1, 2);
        return RawRecord{"", s.name + " buys " + num(a) + " packs of " + num(b) + " " + s.item + " and then loses " +
                                 num(c) + " of them . how many " + s.item + " remain ?",
                         num(a) + " * " + num(b) + " - " + num(c), Rational(a * b - c)};
      },
      [](const Slots& s, Draw& d) {
        auto c = d(2, 6), k = d(7, 15), a = d(20, 40);
        auto b = c * k - a % c + c * 20;  // makes a + b divisible by c
        return RawRecord{"", s.name + " had " + num(a) + " " + s.item + " and found " + num(b) + " more . " +
                                 s.pronoun + " split them equally into " + num(c) + " bags . how many " + s.item +
                                 " are in each bag ?",
                         "( " + num(a) + " + " + num(b) + " ) / " + num(c), Rational(a + b, c)};
      },
      [](const Slots& s, Draw& d) {
        auto b = d(2, 9), c = d(10, 19), a = b + c + d(5, 50);
        return RawRecord{"", "there are " + num(a) + " " + s.item + " in a basket . " + s.name + " removes " + num(b) +
                                 " and then " + num(c) + " more . how many " + s.item + " are still in the basket ?",
                         num(a) + " - " + num(b) + " - " + num(c), Rational(a - b - c)};
      },
      [](const Slots& s, Draw& d) {
        auto a = d(2, 9), b = d(10, 30);
        return RawRecord{"", s.name + " has " + num(a) + " " + s.item + " . " + s.friend_name + " has " + num(b) +
                                 " times as many . how many " + s.item + " do they have together ?",
                         num(a) + " + " + num(a) + " * " + num(b), Rational(a + a * b)};
      },
      [](const Slots& s, Draw& d) {
        auto a = d(2, 9), b = d(10, 20), c = d(21, 40);
        return RawRecord{"", s.name + " reads " + num(a) + " " + s.item + " each week for " + num(b) +
                                 " weeks and gets " + num(c) + " " + s.item + " as gifts . how many " + s.item +
                                 " is that in all ?",
                         num(a) + " * " + num(b) + " + " + num(c), Rational(a * b + c)};
      },
  };
  return kTemplates;
}

}  // namespace

std::size_t synthetic_template_count() { return templates().size(); }

std::vector<RawRecord> synthetic_corpus(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Draw draw{rng};
  std::vector<RawRecord> out;
  out.reserve(n);
  const auto& all = templates();
  for (std::size_t i = 0; i < n; ++i) {
    Slots slots;
    const Person& p = kPeople[rng() % kPeople.size()];
    const Person& f = kPeople[rng() % kPeople.size()];
    slots.name = p.name;
    slots.pronoun = p.pronoun;
    slots.friend_name = f.name == p.name ? "their friend" : f.name;
    slots.item = kItems[rng() % kItems.size()];
    RawRecord r = all[i % all.size()](slots, draw);
    r.id = "syn-" + std::to_string(i);
    out.push_back(std::move(r));
  }
  return out;
}

PretrainedEmbeddings synthetic_embeddings(std::span<const std::string> tokens, int width, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  PretrainedEmbeddings out;
  out.provenance = "synthetic";
  out.vectors.resize(static_cast<Eigen::Index>(tokens.size()), width);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out.index.emplace(tokens[i], static_cast<Eigen::Index>(i));
    out.tokens.push_back(tokens[i]);
    for (int c = 0; c < width; ++c) out.vectors(static_cast<Eigen::Index>(i), c) = gauss(rng);
  }
  return out;
}

}  // namespace mmtm
