#ifndef READMEM_READMEM_HPP
#define READMEM_READMEM_HPP

#include "readmem/attention.hpp"
#include "readmem/container.hpp"
#include "readmem/embedding.hpp"
#include "readmem/episode.hpp"
#include "readmem/errors.hpp"
#include "readmem/fixtures.hpp"
#include "readmem/gramian.hpp"
#include "readmem/memory_manager.hpp"
#include "readmem/oracle.hpp"
#include "readmem/oracle_check.hpp"
#include "readmem/rea.hpp"
#include "readmem/stream.hpp"

#endif  // READMEM_READMEM_HPP
