#include "cmi/nn/network.hpp"

#include <istream>
#include <ostream>

#include "cmi/core/errors.hpp"

namespace cmi::nn {

Tensor Network::forward(const Tensor& x, bool train) {
  Tensor cur = x;
  for (auto& layer : layers_) cur = layer->forward(cur, train);
  return cur;
}

Tensor Network::backward(const Tensor& dy) {
  Tensor cur = dy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
    cur = (*it)->backward(cur);
  return cur;
}

std::vector<ParamTensor*> Network::params() {
  std::vector<ParamTensor*> out;
  for (auto& layer : layers_) layer->collect_params(out);
  return out;
}

std::vector<BufferTensor*> Network::buffers() {
  std::vector<BufferTensor*> out;
  for (auto& layer : layers_) layer->collect_buffers(out);
  return out;
}

void Network::zero_grad() {
  for (ParamTensor* p : params())
    std::fill(p->grad.begin(), p->grad.end(), 0.0f);
}

std::size_t Network::param_count() {
  std::size_t total = 0;
  for (ParamTensor* p : params()) total += p->value.size();
  return total;
}

void Network::copy_state_from(Network& other) {
  auto dst_p = params();
  auto src_p = other.params();
  if (dst_p.size() != src_p.size())
    raise(ErrorKind::ArchitectureMismatch, "parameter list size differs");
  for (std::size_t i = 0; i < dst_p.size(); ++i) {
    if (dst_p[i]->value.size() != src_p[i]->value.size())
      raise(ErrorKind::ArchitectureMismatch,
            "parameter shape differs at " + dst_p[i]->name);
    dst_p[i]->value = src_p[i]->value;
  }
  auto dst_b = buffers();
  auto src_b = other.buffers();
  if (dst_b.size() != src_b.size())
    raise(ErrorKind::ArchitectureMismatch, "buffer list size differs");
  for (std::size_t i = 0; i < dst_b.size(); ++i) dst_b[i]->value = src_b[i]->value;
}

namespace {

void write_blob(std::ostream& out, const std::vector<float>& v) {
  const std::uint64_t n = v.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(float)));
}

void read_blob(std::istream& in, std::vector<float>& v) {
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!in || n != v.size())
    raise(ErrorKind::CorruptCheckpoint, "parameter blob size mismatch");
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(float)));
  if (!in) raise(ErrorKind::CorruptCheckpoint, "truncated parameter blob");
}

}  // namespace

void Network::save_state(std::ostream& out) {
  for (ParamTensor* p : params()) write_blob(out, p->value);
  for (BufferTensor* b : buffers()) write_blob(out, b->value);
}

void Network::load_state(std::istream& in) {
  for (ParamTensor* p : params()) read_blob(in, p->value);
  for (BufferTensor* b : buffers()) read_blob(in, b->value);
}

}  // namespace cmi::nn
