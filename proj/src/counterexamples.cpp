#include "catemnar/counterexamples.hpp"

#include <array>
#include <iomanip>
#include <sstream>

namespace catemnar {

namespace {

using Q = Rational;

Q frac(long a, long b) { return Q(a) / Q(b); }

std::string cell(const char* sup, int x, int t) {
  return std::string("p^") + sup + "_" + std::to_string(x) + std::to_string(t);
}

struct Model1 {
  const char* label;
  Q px1;
  std::array<Q, 2> pt1;  // P(T=1 | X=x)
  std::array<Q, 4> pi;   // P(R^X=R^T=1 | x, t), index 2x+t
};

}  // namespace

bool CounterexampleReport::passed() const {
  for (const auto& r : rows)
    if (!r.pass()) return false;
  return !rows.empty();
}

std::string CounterexampleReport::table() const {
  std::ostringstream os;
  os << title << "\n";
  for (const auto& r : rows)
    os << "  " << std::left << std::setw(20) << r.name << std::setw(10) << r.expected.str()
       << std::setw(10) << r.actual.str() << (r.pass() ? "PASS" : "FAIL") << "\n";
  return os.str();
}

CounterexampleReport verify_counterexample_1() {
  CounterexampleReport rep;
  rep.title = "counterexample 1: ATE not identified";
  const std::array<Q, 4> theta = {frac(1, 5), frac(4, 5), frac(4, 5), frac(1, 5)};
  const std::array<long, 4> p11 = {45, 72, 28, 12}, p01 = {180, 18, 7, 48};
  const Q pplus1 = frac(123, 800), pplus0 = frac(267, 800);

  const std::array<Model1, 2> models = {
      Model1{"A", frac(1, 4), {frac(1, 4), frac(3, 4)},
             {frac(1, 2), frac(3, 5), frac(7, 10), frac(2, 5)}},
      Model1{"B", frac(1, 2), {frac(17, 50), frac(21, 25)},
             {frac(75, 88), frac(45, 68), frac(35, 64), frac(5, 28)}}};
  const std::array<Q, 2> ate_expected = {frac(3, 10), Q(0)};

  for (std::size_t m = 0; m < 2; ++m) {
    const auto& md = models[m];
    const std::string tag = std::string(md.label) + " ";
    Q plus1 = 0, plus0 = 0;
    for (int x = 0; x < 2; ++x)
      for (int t = 0; t < 2; ++t) {
        const int k = 2 * x + t;
        const Q px = x ? md.px1 : Q(1) - md.px1;
        const Q pt = t ? md.pt1[x] : Q(1) - md.pt1[x];
        const Q gamma = px * pt;
        rep.rows.push_back({tag + cell("11", x, t), frac(p11[k], 800),
                            gamma * theta[k] * md.pi[k]});
        rep.rows.push_back({tag + cell("01", x, t), frac(p01[k], 800),
                            gamma * (Q(1) - theta[k]) * md.pi[k]});
        plus1 += gamma * theta[k] * (Q(1) - md.pi[k]);
        plus0 += gamma * (Q(1) - theta[k]) * (Q(1) - md.pi[k]);
      }
    rep.rows.push_back({tag + "p^+1", pplus1, plus1});
    rep.rows.push_back({tag + "p^+0", pplus0, plus0});
    // theta recovered from the observed cells must equal the shared theta.
    for (int k = 0; k < 4; ++k)
      rep.rows.push_back({tag + "theta_" + std::to_string(k / 2) + std::to_string(k % 2),
                          theta[k], frac(p11[k], p11[k] + p01[k])});
    Q ate = 0;
    for (int x = 0; x < 2; ++x) {
      const Q px = x ? md.px1 : Q(1) - md.px1;
      ate += px * (theta[2 * x + 1] - theta[2 * x]);
    }
    rep.rows.push_back({tag + "ATE", ate_expected[m], ate});
    rep.rows.push_back({tag + "ATE closed form", ate_expected[m],
                        frac(3, 5) * (Q(1) - 2 * md.px1)});
  }
  return rep;
}

CounterexampleReport verify_counterexample_2() {
  CounterexampleReport rep;
  rep.title = "counterexample 2: CATE not identified";
  const std::array<long, 4> p11 = {30, 24, 12, 126}, p01 = {192, 28, 36, 81},
                            p0 = {78, 48, 52, 93};
  const Q px1 = frac(1, 2);
  const std::array<Q, 2> pt1 = {frac(1, 4), frac(3, 4)};

  struct Model2 {
    const char* label;
    std::array<Q, 4> theta;  // index 2x+t
    std::array<Q, 8> pi;     // index 4x+2t+y
    std::array<Q, 2> tau;
  };
  const std::array<Model2, 2> models = {
      Model2{"A",
             {frac(1, 5), frac(3, 5), frac(2, 5), frac(7, 10)},
             {frac(4, 5), frac(1, 2), frac(7, 10), frac(2, 5), frac(3, 5), frac(3, 10),
              frac(9, 10), frac(3, 5)},
             {frac(2, 5), frac(3, 10)}},
      Model2{"B",
             {frac(3, 10), frac(1, 2), frac(1, 2), frac(3, 5)},
             {frac(32, 35), frac(1, 3), frac(14, 25), frac(12, 25), frac(18, 25), frac(6, 25),
              frac(27, 40), frac(7, 10)},
             {frac(1, 5), frac(1, 10)}}};

  for (const auto& md : models) {
    const std::string tag = std::string(md.label) + " ";
    for (int x = 0; x < 2; ++x)
      for (int t = 0; t < 2; ++t) {
        const int k = 2 * x + t;
        const Q pxt = (x ? px1 : Q(1) - px1) * (t ? pt1[x] : Q(1) - pt1[x]);
        const Q& th = md.theta[k];
        const Q& pi0 = md.pi[4 * x + 2 * t];
        const Q& pi1 = md.pi[4 * x + 2 * t + 1];
        rep.rows.push_back({tag + cell("11", x, t), frac(p11[k], 800), pxt * th * pi1});
        rep.rows.push_back({tag + cell("01", x, t), frac(p01[k], 800),
                            pxt * (Q(1) - th) * pi0});
        rep.rows.push_back({tag + cell("+0", x, t), frac(p0[k], 800),
                            pxt * (th * (Q(1) - pi1) + (Q(1) - th) * (Q(1) - pi0))});
      }
    for (int x = 0; x < 2; ++x)
      rep.rows.push_back({tag + "tau(" + std::to_string(x) + ")", md.tau[x],
                          md.theta[2 * x + 1] - md.theta[2 * x]});
  }
  return rep;
}

}  // namespace catemnar
