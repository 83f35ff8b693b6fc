// Lane-generic orbit propagation. Included inside a per-ISA namespace after
// that namespace has defined `Lane`; has no includes of its own so the two
// instantiations never share an inline symbol.
//
// Lane must provide: width, broadcast, load, store, + - * /, sqrt, and
// split(x, mant, expo) returning x = mant * 2^expo with mant in [1, 2).

inline void resync_phase(const double* theta0, long t, double alpha, double* zr, double* zi,
                         int width) {
  for (int l = 0; l < width; ++l) {
    double ph = theta0[l] + static_cast<double>(t) * alpha;
    ph -= std::floor(ph);
    zr[l] = std::cos(kTwoPi * ph);
    zi[l] = std::sin(kTwoPi * ph);
  }
}

inline void propagate_batch(const CompanionForm& form, double alpha, const double* theta0,
                            long warmup, long n, int stride, double* full, double* half,
                            long* half_steps) {
  constexpr int W = Lane::width;
  constexpr long kResync = 1024;
  const int m = form.dim;
  const int K = std::max(std::abs(form.kmin), std::abs(form.kmax()));

  // Fourier coefficients of f on [-K, K], zero-padded
  std::vector<Lane> cr(2 * K + 1, Lane::broadcast(0.0)), ci(2 * K + 1, Lane::broadcast(0.0));
  for (int k = form.kmin; k <= form.kmax(); ++k) {
    cr[k + K] = Lane::broadcast(form.fourier[k - form.kmin].real());
    ci[k + K] = Lane::broadcast(form.fourier[k - form.kmin].imag());
  }
  std::vector<Lane> rr(m), ri(m);
  for (int j = 0; j < m; ++j) {
    rr[j] = Lane::broadcast(form.row[j].real());
    ri[j] = Lane::broadcast(form.row[j].imag());
  }

  std::vector<Lane> qr(m * m, Lane::broadcast(0.0)), qi(m * m, Lane::broadcast(0.0));
  for (int j = 0; j < m; ++j) qr[j * m + j] = Lane::broadcast(1.0);
  std::vector<Lane> nr(m), ni(m);  // new first row of A*Q
  std::vector<Lane> ar(m), ai(m);  // first row of A

  std::vector<Lane> mant(m, Lane::broadcast(1.0)), expo(m, Lane::broadcast(0.0));
  std::vector<Lane> half_mant(m, Lane::broadcast(1.0)), half_expo(m, Lane::broadcast(0.0));
  bool have_half = false;

  alignas(64) double tmp_r[W], tmp_i[W];
  resync_phase(theta0, 0, alpha, tmp_r, tmp_i, W);
  Lane zr = Lane::load(tmp_r), zi = Lane::load(tmp_i);
  const Lane wr = Lane::broadcast(std::cos(kTwoPi * alpha));
  const Lane wi = Lane::broadcast(std::sin(kTwoPi * alpha));

  const long total = warmup + n;
  for (long t = 0; t < total; ++t) {
    if (t > 0 && t % kResync == 0) {
      resync_phase(theta0, t, alpha, tmp_r, tmp_i, W);
      zr = Lane::load(tmp_r);
      zi = Lane::load(tmp_i);
    }

    // f(theta) = c_0 + sum_{k>0} (c_k z^k + c_{-k} conj(z)^k); |z| = 1
    Lane fr = cr[K], fi = ci[K];
    Lane pr = Lane::broadcast(1.0), pi = Lane::broadcast(0.0);
    for (int k = 1; k <= K; ++k) {
      const Lane tr = pr * zr - pi * zi;
      pi = pr * zi + pi * zr;
      pr = tr;
      fr = fr + (cr[K + k] * pr - ci[K + k] * pi) + (cr[K - k] * pr + ci[K - k] * pi);
      fi = fi + (cr[K + k] * pi + ci[K + k] * pr) + (ci[K - k] * pr - cr[K - k] * pi);
    }
    for (int j = 0; j < m; ++j) {
      ar[j] = rr[j];
      ai[j] = ri[j];
    }
    ar[form.pivot] = ar[form.pivot] + fr;
    ai[form.pivot] = ai[form.pivot] + fi;

    for (int c = 0; c < m; ++c) {
      Lane sr = Lane::broadcast(0.0), si = Lane::broadcast(0.0);
      for (int j = 0; j < m; ++j) {
        sr = sr + (ar[j] * qr[j * m + c] - ai[j] * qi[j * m + c]);
        si = si + (ar[j] * qi[j * m + c] + ai[j] * qr[j * m + c]);
      }
      nr[c] = sr;
      ni[c] = si;
    }
    for (int r = m - 1; r >= 1; --r) {
      for (int c = 0; c < m; ++c) {
        qr[r * m + c] = qr[(r - 1) * m + c];
        qi[r * m + c] = qi[(r - 1) * m + c];
      }
    }
    for (int c = 0; c < m; ++c) {
      qr[c] = nr[c];
      qi[c] = ni[c];
    }

    {
      const Lane tr = zr * wr - zi * wi;
      zi = zr * wi + zi * wr;
      zr = tr;
    }

    const long done = t + 1;
    if (done % stride != 0 && done != total && done != warmup) continue;

    // modified Gram-Schmidt, two passes against earlier columns
    for (int c = 0; c < m; ++c) {
      for (int pass = 0; pass < 2; ++pass) {
        for (int p = 0; p < c; ++p) {
          Lane dr = Lane::broadcast(0.0), di = Lane::broadcast(0.0);
          for (int r = 0; r < m; ++r) {
            // conj(q_p) . q_c
            dr = dr + (qr[r * m + p] * qr[r * m + c] + qi[r * m + p] * qi[r * m + c]);
            di = di + (qr[r * m + p] * qi[r * m + c] - qi[r * m + p] * qr[r * m + c]);
          }
          for (int r = 0; r < m; ++r) {
            const Lane xr = qr[r * m + c] - (dr * qr[r * m + p] - di * qi[r * m + p]);
            const Lane xi = qi[r * m + c] - (dr * qi[r * m + p] + di * qr[r * m + p]);
            qr[r * m + c] = xr;
            qi[r * m + c] = xi;
          }
        }
      }
      Lane ss = Lane::broadcast(0.0);
      for (int r = 0; r < m; ++r) ss = ss + (qr[r * m + c] * qr[r * m + c] + qi[r * m + c] * qi[r * m + c]);
      const Lane norm = Lane::sqrt(ss);
      const Lane inv = Lane::broadcast(1.0) / norm;
      for (int r = 0; r < m; ++r) {
        qr[r * m + c] = qr[r * m + c] * inv;
        qi[r * m + c] = qi[r * m + c] * inv;
      }
      Lane mt, ex;
      Lane::split(mant[c] * norm, mt, ex);
      mant[c] = mt;
      expo[c] = expo[c] + ex;
    }

    if (done == warmup) {
      // burn-in finished: the frame is aligned, start counting growth
      for (int c = 0; c < m; ++c) {
        mant[c] = Lane::broadcast(1.0);
        expo[c] = Lane::broadcast(0.0);
      }
      continue;
    }
    const long counted = done - warmup;
    if (!have_half && 2 * counted >= n) {
      half_mant = mant;
      half_expo = expo;
      *half_steps = counted;
      have_half = true;
    }
  }

  // A non-finite frame means a zero column norm somewhere along the orbit.
  bool finite = true;
  for (int i = 0; i < m * m; ++i) {
    Lane::store(tmp_r, qr[i]);
    Lane::store(tmp_i, qi[i]);
    for (int l = 0; l < W; ++l) finite = finite && std::isfinite(tmp_r[l]) && std::isfinite(tmp_i[l]);
  }
  if (!finite) fail(ErrorKind::DegenerateFrame, "orbit frame lost rank (singular cocycle value)");

  const double ln2 = std::numbers::ln2;
  alignas(64) double bm[W], be[W];
  for (int c = 0; c < m; ++c) {
    Lane::store(bm, mant[c]);
    Lane::store(be, expo[c]);
    for (int l = 0; l < W; ++l) full[l * m + c] = be[l] * ln2 + std::log(bm[l]);
    Lane::store(bm, half_mant[c]);
    Lane::store(be, half_expo[c]);
    for (int l = 0; l < W; ++l) half[l * m + c] = be[l] * ln2 + std::log(bm[l]);
  }
}

inline void run_all(const CompanionForm& form, double alpha, const double* theta0, int count,
                    long warmup, long n, int stride, double* full, double* half, long* half_steps) {
  constexpr int W = Lane::width;
  const int m = form.dim;
  alignas(64) double th[W];
  std::vector<double> bf(W * m), bh(W * m);
  for (int start = 0; start < count; start += W) {
    const int used = std::min(W, count - start);
    for (int l = 0; l < W; ++l) th[l] = theta0[start + std::min(l, used - 1)];
    propagate_batch(form, alpha, th, warmup, n, stride, bf.data(), bh.data(), half_steps);
    for (int l = 0; l < used; ++l) {
      for (int c = 0; c < m; ++c) {
        full[(start + l) * m + c] = bf[l * m + c];
        half[(start + l) * m + c] = bh[l * m + c];
      }
    }
  }
}
