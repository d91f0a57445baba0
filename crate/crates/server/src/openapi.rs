use serde_json::{json, Value};

fn op(summary: &str, ok: u16) -> Value {
    json!({
        "summary": summary,
        "responses": {
            ok.to_string(): {"description": "success"},
            "default": {"description": "error", "content": {"application/json": {"schema": {"$ref": "#/components/schemas/ApiError"}}}}
        }
    })
}

fn ws_param() -> Value {
    json!({"name": "ws", "in": "path", "required": true, "schema": {"type": "string", "pattern": "^[A-Za-z0-9_-]{1,64}$"}})
}

/// Machine-readable description of every route.
pub fn openapi_document() -> Value {
    let mut paths = serde_json::Map::new();
    let mut add = |path: &str, method: &str, summary: &str, ok: u16| {
        let entry = paths.entry(format!("/api/v1{path}")).or_insert_with(|| json!({}));
        let mut o = op(summary, ok);
        if path.contains("{ws}") {
            o["parameters"] = json!([ws_param()]);
        }
        entry[method] = o;
    };
    add("/health", "get", "liveness probe", 200);
    add("/openapi.json", "get", "this document", 200);
    add("/workspaces", "get", "list workspaces", 200);
    add("/workspaces", "post", "create a workspace; body {\"name\"}", 201);
    add("/workspaces/{ws}/iot/uploads", "post", "stage a raw IoT table; query name=<file name>", 201);
    add("/workspaces/{ws}/iot/uploads/{hash}/mapping", "get", "suggest a column mapping", 200);
    add("/workspaces/{ws}/iot/uploads/{hash}/normalize", "post", "normalize with a ColumnMapping body", 200);
    add("/workspaces/{ws}/iot/summary", "get", "device-type summary of all normalized readings", 200);
    add("/workspaces/{ws}/ocel", "post", "upload an OCEL 2.0 SQLite store as the working store", 201);
    add("/workspaces/{ws}/ocel/stats", "get", "log statistics", 200);
    add("/workspaces/{ws}/ocel/dfg", "get", "directly-follows graph; query object_type", 200);
    add("/workspaces/{ws}/ocel/violations", "get", "validation findings", 200);
    add("/workspaces/{ws}/ocel/download", "get", "working store bytes with x-content-sha256; optional query token", 200);
    add("/workspaces/{ws}/plans", "get", "saved plans", 200);
    add("/workspaces/{ws}/plans", "post", "plan an IntegrationSpec body; optional query preview", 201);
    add("/workspaces/{ws}/plans/{id}", "get", "one saved plan", 200);
    add("/workspaces/{ws}/plans/{id}/execute", "post", "execute a plan as a job", 200);
    add("/workspaces/{ws}/jobs", "get", "latest state of every job", 200);
    add("/workspaces/{ws}/jobs/{id}", "get", "one job", 200);
    add("/workspaces/{ws}/ledger", "get", "every ledger entry", 200);
    json!({
        "openapi": "3.0.3",
        "info": {"title": "ocelink", "version": env!("CARGO_PKG_VERSION")},
        "paths": paths,
        "components": {
            "securitySchemes": {"bearer": {"type": "http", "scheme": "bearer"}},
            "schemas": {
                "ApiError": {
                    "type": "object",
                    "required": ["status", "code", "message"],
                    "properties": {
                        "status": {"type": "integer"},
                        "code": {"type": "string"},
                        "message": {"type": "string"},
                        "field": {"type": "string", "description": "dotted path of the offending input"}
                    }
                }
            }
        }
    })
}
