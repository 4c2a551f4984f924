#include "aghint/common.hpp"

#include <openssl/evp.h>

#include <array>

#ifdef AGHINT_HAVE_OPENMP
#include <omp.h>
#endif

namespace aghint {

std::uint64_t mix64(std::uint64_t x) noexcept {
  // splitmix64 finalizer
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, Stream stream, std::uint64_t index) noexcept {
  return mix64(mix64(root ^ mix64(static_cast<std::uint64_t>(stream))) + index);
}

double counter_uniform(std::uint64_t key, std::uint64_t counter) noexcept {
  const std::uint64_t bits = mix64(key ^ mix64(counter));
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

Sha256::Sha256() : ctx_(EVP_MD_CTX_new()) {
  EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr);
}

Sha256::~Sha256() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

Sha256& Sha256::update(const void* data, std::size_t size) {
  EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data, size);
  return *this;
}

std::string Sha256::hex() {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), digest.data(), &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256_hex(std::string_view data) { return Sha256().update(data).hex(); }

namespace {
int g_threads = 0;
}

void set_thread_count(int threads) {
  g_threads = threads < 0 ? 0 : threads;
#ifdef AGHINT_HAVE_OPENMP
  if (g_threads > 0) omp_set_num_threads(g_threads);
#endif
}

int thread_count() {
#ifdef AGHINT_HAVE_OPENMP
  return g_threads > 0 ? g_threads : omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace aghint
