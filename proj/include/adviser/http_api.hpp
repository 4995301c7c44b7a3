#pragma once

#include <string>

#include "adviser/orchestrator.hpp"

namespace httplib {
class Server;
}

namespace adviser::gateway {

// Principal header on every request.
inline constexpr const char* kPrincipalHeader = "X-Adviser-Principal";

// Routes (all bodies JSON; see docs/http_api.md):
//   POST /v1/jobs                    submit (RunRequest) -> {job_id} | {dry_run}
//   GET  /v1/jobs                    list (?group=G filters by owner)
//   GET  /v1/jobs/{id}               job document
//   POST /v1/jobs/{id}/cancel        cancel
//   GET  /v1/jobs/{id}/events        server-sent events, honours Last-Event-ID
//   GET  /v1/jobs/{id}/record        provenance record of a terminal job
//   GET  /v1/templates               list
//   POST /v1/templates               register -> {name, version}
//   GET  /v1/templates/{name}        latest version
//   GET  /v1/templates/{name}/{ver}  exact version
//   GET  /v1/records                 provenance records (?template=&from=&to=)
//   GET  /v1/records/compare         field diff (?a=&b=)
//   GET  /v1/records/{id}            one record
//   GET  /v1/scaling                 CSV scaling table (?template=)
//   GET  /v1/catalog                 snapshot
//   GET  /v1/budgets                 list
//   GET  /v1/budgets/{id}            one budget
void mount_routes(httplib::Server& server, Orchestrator& orchestrator);

int http_status(ErrorCode code) noexcept;

}  // namespace adviser::gateway
