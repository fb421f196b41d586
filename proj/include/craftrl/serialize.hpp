#pragma once
#include <Eigen/Core>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace craftrl::io {

inline void put_u64(std::ostream& os, uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), 8);
}

inline uint64_t get_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (!is) throw std::runtime_error("checkpoint stream truncated (u64)");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
  return v;
}

inline void put_i64(std::ostream& os, int64_t v) { put_u64(os, static_cast<uint64_t>(v)); }
inline int64_t get_i64(std::istream& is) { return static_cast<int64_t>(get_u64(is)); }

inline void put_f64(std::ostream& os, double v) {
  static_assert(sizeof(double) == 8);
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

inline double get_f64(std::istream& is) {
  uint64_t bits = get_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

inline void put_str(std::ostream& os, const std::string& s) {
  put_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_str(std::istream& is) {
  uint64_t n = get_u64(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw std::runtime_error("checkpoint stream truncated (str)");
  return s;
}

inline void put_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  put_i64(os, m.rows());
  put_i64(os, m.cols());
  os.write(reinterpret_cast<const char*>(m.data()),
           static_cast<std::streamsize>(sizeof(double) * m.size()));
}

inline Eigen::MatrixXd get_matrix(std::istream& is) {
  int64_t r = get_i64(is);
  int64_t c = get_i64(is);
  if (r < 0 || c < 0 || r * c > (1LL << 32)) throw std::runtime_error("corrupt matrix header");
  Eigen::MatrixXd m(r, c);
  is.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!is) throw std::runtime_error("checkpoint stream truncated (matrix)");
  return m;
}

template <typename T, typename PutFn>
void put_vec(std::ostream& os, const std::vector<T>& v, PutFn put) {
  put_u64(os, v.size());
  for (const auto& x : v) put(os, x);
}

template <typename T, typename GetFn>
std::vector<T> get_vec(std::istream& is, GetFn get) {
  uint64_t n = get_u64(is);
  std::vector<T> v;
  v.reserve(n);
  for (uint64_t i = 0; i < n; ++i) v.push_back(get(is));
  return v;
}

}  // namespace craftrl::io
